//! Synthetic campaigns whose creatives are stopped by a CPA-ratio operator.

mod config;
mod generate;
mod split;

pub use config::{CountRange, GeneratorConfig, LogNormalSpec, NormalSpec, RealRange};
pub use generate::{generate, lifetime_share, sales_share, Dataset, Mechanism, OracleTrace, WEAROUT_ONSET};
pub use split::{split, Split, SplitAssignment, SplitFractions};

/// Bucket edges of the reference share table: `[0,3)`, `[3,7)`, `[7,inf)`.
pub const SHARE_EDGES: [f64; 3] = [0.0, 3.0, 7.0];
