use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, LogNormal, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use super::config::{GeneratorConfig, LogNormalSpec};
use crate::error::{Error, Result};
use crate::features::{AdCreative, DailyPerformance, Gender};
use crate::seed::derive_seed;

/// Why the oracle operator stopped a creative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mechanism {
    CutOut,
    WearOut,
    Censored,
}

/// Ground truth kept by the simulator for evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleTrace {
    pub creative_id: String,
    pub discontinuation_day: u32,
    pub mechanism: Mechanism,
    /// Rolling CPA ratio seen by the operator each served day; `None` is
    /// spend without any conversion (an infinite ratio).
    pub cpa_ratio: Vec<Option<f64>>,
    /// Latent quality multiplier q.
    pub quality: f64,
    /// Daily fatigue factor applied after the wear-out onset.
    pub decay: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub creatives: Vec<AdCreative>,
    pub traces: Vec<OracleTrace>,
}

/// Day at which wear-out dynamics start.
pub const WEAROUT_ONSET: u32 = 10;

const GENRES: [&str; 12] = [
    "apparel", "automotive", "beauty", "books", "education", "finance", "food", "games", "health",
    "home", "travel", "utilities",
];

/// Simulates every campaign of `cfg`; campaign `i` draws only from its own derived stream.
pub fn generate(cfg: &GeneratorConfig) -> Result<Dataset> {
    cfg.validate()?;
    let dirs = SignalDirections::new(cfg);
    let mut creatives = Vec::new();
    let mut traces = Vec::new();
    for i in 0..cfg.n_campaigns {
        let (c, t) = simulate_campaign(cfg, &dirs, i)?;
        creatives.extend(c);
        traces.extend(t);
    }
    Ok(Dataset { creatives, traces })
}

fn genre_name(i: usize) -> String {
    GENRES.get(i).map_or_else(|| format!("genre-{i:03}"), |g| (*g).to_string())
}

struct SignalDirections {
    text: Vec<f64>,
    image_quality: Vec<f64>,
    image_fatigue: Vec<f64>,
}

fn unit_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

impl SignalDirections {
    fn new(cfg: &GeneratorConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, u64::MAX));
        Self {
            text: unit_vector(&mut rng, cfg.text_dim),
            image_quality: unit_vector(&mut rng, cfg.image_dim),
            image_fatigue: unit_vector(&mut rng, cfg.image_dim),
        }
    }
}

fn lognormal(rng: &mut ChaCha8Rng, spec: LogNormalSpec) -> f64 {
    LogNormal::new(spec.median.ln(), spec.sigma).map(|d| d.sample(rng)).unwrap_or(spec.median)
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn uniform(rng: &mut ChaCha8Rng, min: f64, max: f64) -> f64 {
    if max > min {
        rng.random_range(min..max)
    } else {
        min
    }
}

struct Campaign {
    id: String,
    gender: Gender,
    genre: String,
    target_cpa: f64,
    ctr: f64,
    cvr: f64,
    impressions: f64,
    cpc: f64,
    value: f64,
}

fn simulate_campaign(
    cfg: &GeneratorConfig,
    dirs: &SignalDirections,
    index: usize,
) -> Result<(Vec<AdCreative>, Vec<OracleTrace>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, index as u64));
    let target_cpa = uniform(&mut rng, cfg.target_cpa.min, cfg.target_cpa.max);
    let cvr = lognormal(&mut rng, cfg.base_cvr).min(0.9);
    let efficiency = uniform(&mut rng, cfg.cpa_efficiency.min, cfg.cpa_efficiency.max);
    let camp = Campaign {
        id: format!("c{index:05}"),
        gender: Gender::VALUES[rng.random_range(0..3)],
        genre: genre_name(rng.random_range(0..cfg.n_genres)),
        target_cpa,
        ctr: lognormal(&mut rng, cfg.base_ctr).min(0.9),
        cvr,
        impressions: lognormal(&mut rng, cfg.daily_impressions),
        cpc: target_cpa * cvr * efficiency,
        value: lognormal(&mut rng, cfg.value_per_conversion),
    };
    let n = rng.random_range(cfg.creatives_per_campaign.min..=cfg.creatives_per_campaign.max);
    let mut creatives = Vec::with_capacity(n);
    let mut traces = Vec::with_capacity(n);
    for j in 0..n {
        let (c, t) = simulate_creative(cfg, dirs, &camp, j, &mut rng)?;
        creatives.push(c);
        traces.push(t);
    }
    Ok((creatives, traces))
}

/// Mean and standard deviation of log quality over the population mixture.
fn log_quality_moments(cfg: &GeneratorConfig) -> (f64, f64) {
    let f = cfg.cutout_fraction;
    let (c, w) = (cfg.cutout_log_quality, cfg.wearout_log_quality);
    let centre = f * c.mean + (1.0 - f) * w.mean;
    let var = f * c.sd * c.sd + (1.0 - f) * w.sd * w.sd + f * (1.0 - f) * (c.mean - w.mean).powi(2);
    (centre, var.sqrt().max(1e-12))
}

fn simulate_creative(
    cfg: &GeneratorConfig,
    dirs: &SignalDirections,
    camp: &Campaign,
    j: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(AdCreative, OracleTrace)> {
    let cut = rng.random_bool(cfg.cutout_fraction);
    let population = if cut { cfg.cutout_log_quality } else { cfg.wearout_log_quality };
    let mix_total: f64 = cfg.quality_mix.iter().sum();
    let z_text = normal(rng);
    let z_image = normal(rng);
    let z_hidden = normal(rng);
    let z = [z_text, z_image, z_hidden]
        .iter()
        .zip(cfg.quality_mix)
        .map(|(z, w)| z * (w / mix_total).sqrt())
        .sum::<f64>();
    let quality = (population.mean + population.sd * z).exp();
    // Content blocks see standardised log quality: the population offset plus their own share.
    let (centre, scale) = log_quality_moments(cfg);
    let offset = (population.mean - centre) / scale;
    let share = |z: f64, w: f64| offset + population.sd * z * (w / mix_total).sqrt() / scale;
    let s_text = share(z_text, cfg.quality_mix[0]);
    let s_image = share(z_image, cfg.quality_mix[1]);

    let z_fatigue = normal(rng);
    let decay = (1.0 - (1.0 - cfg.wearout_decay) * (cfg.decay_spread * z_fatigue).exp()).clamp(0.5, 1.0);
    let ctr_mult = (cfg.ctr_spread * normal(rng)).exp();

    let text_embedding: Vec<f64> = unit_vector(rng, cfg.text_dim)
        .into_iter()
        .zip(&dirs.text)
        .map(|(e, u)| e + cfg.text_snr * s_text * u)
        .collect();
    let image_embedding: Vec<f64> = unit_vector(rng, cfg.image_dim)
        .into_iter()
        .zip(dirs.image_quality.iter().zip(&dirs.image_fatigue))
        .map(|(e, (uq, uf))| e + cfg.image_snr * (s_image * uq + z_fatigue * uf))
        .collect();

    let last_day = if cfg.censor_at_horizon { cfg.horizon_days } else { cfg.horizon_days * 4 };
    let mut daily: Vec<DailyPerformance> = Vec::new();
    let mut ratios = Vec::new();
    let mut stop = None;
    for d in 1..=last_day {
        let fatigue = fatigue(decay, d);
        let ctr_d = (camp.ctr * ctr_mult * quality.powf(cfg.ctr_quality_exponent) * fatigue).clamp(0.0, 0.95);
        let cvr_d = (camp.cvr * quality * fatigue).clamp(0.0, 0.95);
        let lambda = camp.impressions * fatigue.powf(cfg.delivery_elasticity);
        let impressions = if lambda > 0.0 {
            Poisson::new(lambda).map_err(|e| Error::Config(e.to_string()))?.sample(rng) as u64
        } else {
            0
        };
        let clicks = binomial(rng, impressions, ctr_d)?;
        let conversions = binomial(rng, clicks, cvr_d)?;
        daily.push(DailyPerformance { day: d, impressions, clicks, conversions, spend: clicks as f64 * camp.cpc });

        let window = &daily[daily.len().saturating_sub(cfg.rolling_window)..];
        let spend: f64 = window.iter().map(|r| r.spend).sum();
        let conv: u64 = window.iter().map(|r| r.conversions).sum();
        let ratio = match (conv, spend > 0.0) {
            (0, true) => None,
            (0, false) => Some(0.0),
            _ => Some(spend / conv as f64 / camp.target_cpa),
        };
        ratios.push(ratio);
        let threshold = if d <= WEAROUT_ONSET {
            cfg.cutout_threshold * (1.0 + cfg.cutout_patience * (1.0 / f64::from(d) - 1.0 / f64::from(WEAROUT_ONSET)))
        } else {
            cfg.wearout_threshold
        };
        if d >= cfg.min_serving_days && ratio.is_none_or(|r| r > threshold) {
            stop = Some(d);
            break;
        }
    }

    let (day, mechanism) = match stop {
        Some(d) if d <= WEAROUT_ONSET => (d, Mechanism::CutOut),
        Some(d) => (d, Mechanism::WearOut),
        None => (last_day, Mechanism::Censored),
    };
    let total_sales = daily.iter().map(|r| r.conversions as f64).sum::<f64>() * camp.value;
    let creative_id = format!("{}-{j:03}", camp.id);
    let creative = AdCreative {
        creative_id: creative_id.clone(),
        campaign_id: camp.id.clone(),
        gender: camp.gender,
        genre: camp.genre.clone(),
        target_cpa: camp.target_cpa,
        text_embedding,
        image_embedding,
        daily,
        lifetime_days: f64::from(day),
        censored: mechanism == Mechanism::Censored,
        total_sales,
    };
    let trace = OracleTrace { creative_id, discontinuation_day: day, mechanism, cpa_ratio: ratios, quality, decay };
    Ok((creative, trace))
}

/// Multiplier on CTR, CVR and delivery: 1 up to the onset, then `decay^(d - onset)`.
fn fatigue(decay: f64, day: u32) -> f64 {
    if day > WEAROUT_ONSET {
        decay.powi((day - WEAROUT_ONSET) as i32)
    } else {
        1.0
    }
}

fn binomial(rng: &mut ChaCha8Rng, n: u64, p: f64) -> Result<u64> {
    if n == 0 || p <= 0.0 {
        return Ok(0);
    }
    Ok(Binomial::new(n, p).map_err(|e| Error::Config(e.to_string()))?.sample(rng))
}

/// Share of creatives whose lifetime falls in each bucket `[edges[k], edges[k+1])`,
/// the last bucket open-ended.
pub fn lifetime_share(creatives: &[AdCreative], edges: &[f64]) -> Result<Vec<f64>> {
    bucket_share(creatives, edges, |_| 1.0)
}

/// Share of total sales held by each lifetime bucket.
pub fn sales_share(creatives: &[AdCreative], edges: &[f64]) -> Result<Vec<f64>> {
    bucket_share(creatives, edges, |c| c.total_sales)
}

fn bucket_share(creatives: &[AdCreative], edges: &[f64], weight: impl Fn(&AdCreative) -> f64) -> Result<Vec<f64>> {
    if creatives.is_empty() {
        return Err(Error::Domain("share of an empty dataset".into()));
    }
    if edges.is_empty() || edges.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Domain("bucket edges must be non-empty and strictly increasing".into()));
    }
    let mut sums = vec![0.0; edges.len()];
    for c in creatives {
        if let Some(k) = edges.iter().rposition(|e| c.lifetime_days >= *e) {
            sums[k] += weight(c);
        }
    }
    let total: f64 = sums.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Domain("bucket weights sum to zero".into()));
    }
    Ok(sums.into_iter().map(|s| s / total).collect())
}
