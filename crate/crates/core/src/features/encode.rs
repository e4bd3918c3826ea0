use serde::{Deserialize, Serialize};

use super::types::{AdCreative, DailyPerformance, Gender, GenreVocab};
use super::{SERIES_WIDTH, STATS_WIDTH};
use crate::error::{contract, domain, Result};
use crate::nn::{ModelState, Network, Tensor};

/// Cumulative statistics up to the last record in `daily`:
/// `[ln(1+imp), ln(1+clicks), ln(1+conv), ctr, cvr, ln(1+cpa/target_cpa)]`.
///
/// Zero conversions use the spend itself as the CPA.
pub fn encode_statistical(daily: &[DailyPerformance], target_cpa: f64) -> Result<[f64; STATS_WIDTH]> {
    if daily.is_empty() {
        return domain("statistical features need at least one daily record");
    }
    if !(target_cpa > 0.0) {
        return domain(format!("target CPA must be positive, got {target_cpa}"));
    }
    let (mut imp, mut clk, mut conv, mut spend) = (0u64, 0u64, 0u64, 0.0f64);
    for d in daily {
        imp += d.impressions;
        clk += d.clicks;
        conv += d.conversions;
        spend += d.spend;
    }
    let ctr = if imp == 0 { 0.0 } else { clk as f64 / imp as f64 };
    let cvr = if clk == 0 { 0.0 } else { conv as f64 / clk as f64 };
    let cpa = if conv == 0 { spend } else { spend / conv as f64 };
    Ok([
        (imp as f64).ln_1p(),
        (clk as f64).ln_1p(),
        (conv as f64).ln_1p(),
        ctr,
        cvr,
        (cpa / target_cpa).ln_1p(),
    ])
}

/// Gender one-hot followed by the genre's embedding row.
pub fn encode_categorical(gender: Gender, genre: &str, vocab: &GenreVocab, table: &Tensor) -> Result<Vec<f64>> {
    let idx = vocab.index(genre);
    if table.shape.len() != 2 || idx >= table.shape[0] {
        return contract(format!("genre table {:?} has no row {idx}", table.shape));
    }
    let mut out = gender.one_hot().to_vec();
    out.extend_from_slice(table.row(idx));
    Ok(out)
}

/// Affine standardisation `(x - mean) / std` of the statistical and series blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizers {
    pub stats_mean: [f64; STATS_WIDTH],
    pub stats_std: [f64; STATS_WIDTH],
    pub series_mean: [f64; SERIES_WIDTH],
    pub series_std: [f64; SERIES_WIDTH],
}

impl Normalizers {
    /// Leaves every value as computed.
    pub fn identity() -> Self {
        Self {
            stats_mean: [0.0; STATS_WIDTH],
            stats_std: [1.0; STATS_WIDTH],
            series_mean: [0.0; SERIES_WIDTH],
            series_std: [1.0; SERIES_WIDTH],
        }
    }

    /// Moments of the raw blocks over `creatives` observed up to `as_of_day`.
    pub fn fit<'a>(creatives: impl IntoIterator<Item = &'a AdCreative>, as_of_day: usize) -> Self {
        let mut stats = Moments::<STATS_WIDTH>::default();
        let mut series = Moments::<SERIES_WIDTH>::default();
        let ident = Self::identity();
        for c in creatives {
            let t = as_of_day.min(c.daily.len());
            if t == 0 {
                continue;
            }
            if let Ok(s) = encode_statistical(&c.daily[..t], c.target_cpa) {
                stats.push(&s);
            }
            for v in build_series_inputs(&c.daily[..t], &ident) {
                series.push(&v);
            }
        }
        let (stats_mean, stats_std) = stats.finish();
        let (series_mean, series_std) = series.finish();
        Self { stats_mean, stats_std, series_mean, series_std }
    }

    fn apply_stats(&self, s: &mut [f64; STATS_WIDTH]) {
        for i in 0..STATS_WIDTH {
            s[i] = (s[i] - self.stats_mean[i]) / self.stats_std[i];
        }
    }
}

#[derive(Debug)]
struct Moments<const N: usize> {
    n: f64,
    sum: [f64; N],
    sq: [f64; N],
}

impl<const N: usize> Default for Moments<N> {
    fn default() -> Self {
        Self { n: 0.0, sum: [0.0; N], sq: [0.0; N] }
    }
}

impl<const N: usize> Moments<N> {
    fn push(&mut self, v: &[f64; N]) {
        self.n += 1.0;
        for i in 0..N {
            self.sum[i] += v[i];
            self.sq[i] += v[i] * v[i];
        }
    }

    fn finish(&self) -> ([f64; N], [f64; N]) {
        let mut mean = [0.0; N];
        let mut std = [1.0; N];
        if self.n > 0.0 {
            for i in 0..N {
                mean[i] = self.sum[i] / self.n;
                let var = (self.sq[i] / self.n - mean[i] * mean[i]).max(0.0);
                // Constant columns keep unit scale.
                std[i] = if var > 1e-12 { var.sqrt() } else { 1.0 };
            }
        }
        (mean, std)
    }
}

/// `[ln(1+impressions_d), ln(1+clicks_d)]` for every record, standardised.
pub fn build_series_inputs(daily: &[DailyPerformance], norm: &Normalizers) -> Vec<[f64; SERIES_WIDTH]> {
    daily
        .iter()
        .map(|d| {
            let raw = [(d.impressions as f64).ln_1p(), (d.clicks as f64).ln_1p()];
            [
                (raw[0] - norm.series_mean[0]) / norm.series_std[0],
                (raw[1] - norm.series_mean[1]) / norm.series_std[1],
            ]
        })
        .collect()
}

/// `min(impressions / p95, 1)`; zero when the normaliser is zero.
pub fn impression_weight(total_impressions: u64, p95: f64) -> f64 {
    if !(p95 > 0.0) {
        return 0.0;
    }
    (total_impressions as f64 / p95).min(1.0)
}

/// Nearest-rank percentile of `values` (`q` in `[0, 1]`).
pub fn percentile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[rank - 1]
}

/// Raw network inputs for one creative at one as-of day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInput {
    pub text: Vec<f64>,
    pub gender: Gender,
    pub genre: usize,
    pub image: Vec<f64>,
    pub stats: [f64; STATS_WIDTH],
    pub series: Vec<[f64; SERIES_WIDTH]>,
}

/// The trunk input split into blocks; disabled blocks are empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub text: Vec<f64>,
    pub categorical: Vec<f64>,
    pub image: Vec<f64>,
    pub stats: Vec<f64>,
    pub series: Vec<f64>,
}

impl FeatureVector {
    /// Concatenation `text || categorical || image || stats || series`.
    pub fn assembled(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.width());
        for block in [&self.text, &self.categorical, &self.image, &self.stats, &self.series] {
            out.extend_from_slice(block);
        }
        out
    }

    pub fn width(&self) -> usize {
        self.text.len() + self.categorical.len() + self.image.len() + self.stats.len() + self.series.len()
    }
}

/// Dataset-level state shared by every encoding call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureContext {
    pub vocab: GenreVocab,
    pub normalizers: Normalizers,
    pub p95_impressions: f64,
}

/// Network inputs of `creative` from its first `as_of_day` daily records only.
pub fn build_input(creative: &AdCreative, as_of_day: usize, ctx: &FeatureContext) -> Result<ModelInput> {
    if as_of_day == 0 {
        return domain("as-of day must be at least 1");
    }
    if as_of_day > creative.daily.len() {
        return domain(format!(
            "{}: as-of day {as_of_day} beyond {} available records",
            creative.creative_id,
            creative.daily.len()
        ));
    }
    let seen = &creative.daily[..as_of_day];
    let mut stats = encode_statistical(seen, creative.target_cpa)?;
    ctx.normalizers.apply_stats(&mut stats);
    Ok(ModelInput {
        text: creative.text_embedding.clone(),
        gender: creative.gender,
        genre: ctx.vocab.index(&creative.genre),
        image: creative.image_embedding.clone(),
        stats,
        series: build_series_inputs(seen, &ctx.normalizers),
    })
}

/// Builds the inputs and runs the network's embedding and series encoder.
pub fn assemble(
    creative: &AdCreative,
    as_of_day: usize,
    ctx: &FeatureContext,
    net: &Network,
    state: &ModelState,
) -> Result<FeatureVector> {
    let input = build_input(creative, as_of_day, ctx)?;
    net.encode(state, &input)
}
