//! Creative records and the encoders that produce network inputs.

mod encode;
pub mod io;
mod types;

pub use encode::{
    assemble, build_input, build_series_inputs, encode_categorical, encode_statistical,
    impression_weight, percentile, FeatureContext, FeatureVector, ModelInput, Normalizers,
};
pub use types::{AdCreative, DailyPerformance, Gender, GenreVocab};

/// Impressions, clicks, conversions, CTR, CVR, CPA.
pub const STATS_WIDTH: usize = 6;
pub const GENDER_WIDTH: usize = 3;
/// Impressions and clicks per day.
pub const SERIES_WIDTH: usize = 2;
