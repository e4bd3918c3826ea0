use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::survival::TimeGrid;

/// Inclusive integer range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountRange {
    pub min: usize,
    pub max: usize,
}

/// Half-open real range `[min, max)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RealRange {
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalSpec {
    pub mean: f64,
    pub sd: f64,
}

/// Log-normal given by its median and the standard deviation of the log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogNormalSpec {
    pub median: f64,
    pub sigma: f64,
}

/// Every knob of the synthetic campaign simulator.
///
/// Absolute scales (impressions, prices, sales) are arbitrary; only the
/// resulting lifetime and sales shares are calibrated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub n_campaigns: usize,
    pub creatives_per_campaign: CountRange,
    /// Probability that a creative belongs to the low-quality population.
    pub cutout_fraction: f64,
    /// ln q of the low-quality population.
    pub cutout_log_quality: NormalSpec,
    /// ln q of the remaining creatives.
    pub wearout_log_quality: NormalSpec,
    pub base_ctr: LogNormalSpec,
    /// Creative-level CTR multiplier independent of quality.
    pub ctr_spread: f64,
    /// CTR scales as q to this power; CVR scales linearly in q.
    pub ctr_quality_exponent: f64,
    pub base_cvr: LogNormalSpec,
    pub daily_impressions: LogNormalSpec,
    /// Expected CPA ratio of a q = 1 creative.
    pub cpa_efficiency: RealRange,
    pub target_cpa: RealRange,
    pub value_per_conversion: LogNormalSpec,
    /// Median daily multiplicative decay of CTR and CVR after day 10.
    pub wearout_decay: f64,
    /// Spread of ln(1 - decay) across creatives.
    pub decay_spread: f64,
    /// Elasticity of delivered impressions to fatigue.
    pub delivery_elasticity: f64,
    /// Rolling CPA ratio that ends a creative by day 10, before patience.
    pub cutout_threshold: f64,
    /// Extra tolerance granted to young creatives: day d uses
    /// `threshold * (1 + patience * (1/d - 1/10))`.
    pub cutout_patience: f64,
    /// Rolling CPA ratio that ends a creative after day 10.
    pub wearout_threshold: f64,
    pub rolling_window: usize,
    /// The operator never discontinues before this serving day.
    pub min_serving_days: u32,
    pub horizon_days: u32,
    pub censor_at_horizon: bool,
    pub text_dim: usize,
    pub image_dim: usize,
    /// Loading of the text quality component on its signal direction.
    pub text_snr: f64,
    /// Loading of the image quality component and the fatigue rate.
    pub image_snr: f64,
    /// Share of ln q variance carried by the text, image and unobserved components.
    pub quality_mix: [f64; 3],
    pub n_genres: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            n_campaigns: 500,
            creatives_per_campaign: CountRange { min: 5, max: 15 },
            cutout_fraction: 0.9,
            cutout_log_quality: NormalSpec { mean: -1.0, sd: 0.3 },
            wearout_log_quality: NormalSpec { mean: 0.1, sd: 0.2 },
            base_ctr: LogNormalSpec { median: 0.03, sigma: 0.9 },
            ctr_spread: 0.4,
            ctr_quality_exponent: 0.25,
            base_cvr: LogNormalSpec { median: 0.1, sigma: 0.4 },
            daily_impressions: LogNormalSpec { median: 8000.0, sigma: 0.8 },
            cpa_efficiency: RealRange { min: 0.7, max: 0.9 },
            target_cpa: RealRange { min: 20.0, max: 200.0 },
            value_per_conversion: LogNormalSpec { median: 50.0, sigma: 1.0 },
            wearout_decay: 0.985,
            decay_spread: 0.8,
            delivery_elasticity: 1.0,
            cutout_threshold: 1.3,
            cutout_patience: 2.0,
            wearout_threshold: 1.3,
            rolling_window: 3,
            min_serving_days: 2,
            horizon_days: 120,
            censor_at_horizon: true,
            text_dim: 16,
            image_dim: 16,
            text_snr: 1.0,
            image_snr: 1.0,
            quality_mix: [0.4, 0.4, 0.2],
            n_genres: 12,
        }
    }
}

fn bad<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_campaigns == 0 {
            return bad("n_campaigns must be positive");
        }
        let r = self.creatives_per_campaign;
        if r.min == 0 || r.max < r.min {
            return bad("creatives_per_campaign must satisfy 1 <= min <= max");
        }
        if !(0.0..=1.0).contains(&self.cutout_fraction) {
            return bad("cutout_fraction must lie in [0, 1]");
        }
        if !(self.wearout_decay > 0.0 && self.wearout_decay <= 1.0) {
            return bad("wearout_decay must lie in (0, 1]");
        }
        if f64::from(self.horizon_days) < TimeGrid::long().end() {
            return bad(format!("horizon_days must be at least {}", TimeGrid::long().end()));
        }
        for (name, spec) in [
            ("base_ctr", self.base_ctr),
            ("base_cvr", self.base_cvr),
            ("daily_impressions", self.daily_impressions),
            ("value_per_conversion", self.value_per_conversion),
        ] {
            if !(spec.median > 0.0) || !(spec.sigma >= 0.0) {
                return bad(format!("{name} needs a positive median and non-negative sigma"));
            }
        }
        if !(self.base_ctr.median < 1.0 && self.base_cvr.median < 1.0) {
            return bad("CTR and CVR medians must be below 1");
        }
        for (name, rr) in [("target_cpa", self.target_cpa), ("cpa_efficiency", self.cpa_efficiency)] {
            if !(rr.min > 0.0 && rr.max >= rr.min) {
                return bad(format!("{name} must be a positive range"));
            }
        }
        for (name, rr) in [("cutout_log_quality", self.cutout_log_quality), ("wearout_log_quality", self.wearout_log_quality)] {
            if !rr.mean.is_finite() || !(rr.sd >= 0.0) {
                return bad(format!("{name} needs a finite mean and non-negative spread"));
            }
        }
        if !(self.cutout_threshold > 0.0 && self.wearout_threshold > 0.0 && self.cutout_patience >= 0.0) {
            return bad("thresholds must be positive and patience non-negative");
        }
        if self.rolling_window == 0 {
            return bad("rolling_window must be positive");
        }
        if self.min_serving_days == 0 || self.min_serving_days > self.horizon_days {
            return bad("min_serving_days must lie in 1..=horizon_days");
        }
        if self.text_dim == 0 || self.image_dim == 0 {
            return bad("embedding dimensions must be positive");
        }
        if self.quality_mix.iter().any(|w| !(*w >= 0.0)) || self.quality_mix.iter().sum::<f64>() <= 0.0 {
            return bad("quality_mix must be non-negative with a positive sum");
        }
        if self.n_genres == 0 {
            return bad("n_genres must be positive");
        }
        if !(self.ctr_spread >= 0.0 && self.ctr_quality_exponent >= 0.0 && self.decay_spread >= 0.0 && self.delivery_elasticity >= 0.0) {
            return bad("spreads and elasticity must be non-negative");
        }
        if !(self.text_snr >= 0.0 && self.image_snr >= 0.0) {
            return bad("signal-to-noise ratios must be non-negative");
        }
        Ok(())
    }
}
