use serde::{Deserialize, Serialize};

use super::metrics::{cpa_ratio, ndcg_tied, predicted_discontinuation_order, spearman, CpaRatio};
use crate::error::Result;
use crate::features::AdCreative;
use crate::survival::{HazardVector, TimeGrid};

/// Mean and population standard deviation of the finite ratios, with the
/// infinite ones counted apart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioSummary {
    pub mean: f64,
    pub std: f64,
    pub n_finite: usize,
    pub n_infinite: usize,
}

impl RatioSummary {
    pub fn of(ratios: &[CpaRatio]) -> Self {
        let finite: Vec<f64> = ratios.iter().filter_map(|r| r.finite()).collect();
        let n = finite.len();
        let (mean, std) = if n == 0 {
            (f64::NAN, f64::NAN)
        } else {
            let m = finite.iter().sum::<f64>() / n as f64;
            let var = finite.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
            (m, var.sqrt())
        };
        Self { mean, std, n_finite: n, n_infinite: ratios.len() - n }
    }
}

pub struct ShortCaseItem<'a> {
    pub creative: &'a AdCreative,
    /// Interval of `grid` chosen by the model, if any.
    pub predicted_interval: Option<usize>,
    pub oracle_day: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShortCaseReport {
    pub model: RatioSummary,
    pub oracle: RatioSummary,
    pub n: usize,
}

/// CPA ratio when stopping at the predicted day (the interval's upper bound,
/// capped by the real stop day) against stopping at the oracle day.
pub fn short_term_case_study(items: &[ShortCaseItem<'_>], grid: &TimeGrid) -> Result<ShortCaseReport> {
    let mut model = Vec::with_capacity(items.len());
    let mut oracle = Vec::with_capacity(items.len());
    for it in items {
        let predicted = it.predicted_interval.map_or(it.oracle_day, |l| grid.upper(l) as u32);
        model.push(cpa_ratio(it.creative, predicted.min(it.oracle_day) as usize)?);
        oracle.push(cpa_ratio(it.creative, it.oracle_day as usize)?);
    }
    Ok(ShortCaseReport { model: RatioSummary::of(&model), oracle: RatioSummary::of(&oracle), n: items.len() })
}

pub struct LongCaseItem {
    pub creative_id: String,
    pub lifetime_days: f64,
    pub censored: bool,
    pub total_sales: f64,
    /// CPA ratio over the days the model saw.
    pub cpa_ratio: CpaRatio,
    /// Long-grid hazards predicted from the same days.
    pub hazard: HazardVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NdcgPoint {
    pub checkpoint_day: u32,
    pub method: String,
    pub ndcg: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongCaseReport {
    pub points: Vec<NdcgPoint>,
    /// Checkpoints with no creative left.
    pub skipped: Vec<u32>,
}

impl LongCaseReport {
    pub fn get(&self, checkpoint_day: u32, method: &str) -> Option<f64> {
        self.points.iter().find(|p| p.checkpoint_day == checkpoint_day && p.method == method).map(|p| p.ndcg)
    }
}

pub const METHOD_MODEL: &str = "model";
pub const METHOD_SALES: &str = "sales-order";
pub const METHOD_CPA: &str = "cpa-ratio-order";

/// Ascending lifetime, censored after observed stops, then id.
pub fn actual_discontinuation_order(items: &[&LongCaseItem]) -> Vec<String> {
    let mut v: Vec<&&LongCaseItem> = items.iter().collect();
    v.sort_by(|a, b| {
        a.lifetime_days
            .total_cmp(&b.lifetime_days)
            .then(a.censored.cmp(&b.censored))
            .then_with(|| a.creative_id.cmp(&b.creative_id))
    });
    v.into_iter().map(|i| i.creative_id.clone()).collect()
}

/// [`actual_discontinuation_order`] grouped into ties of equal lifetime and censoring.
pub fn actual_discontinuation_groups(items: &[&LongCaseItem]) -> Vec<Vec<String>> {
    let by_id: std::collections::BTreeMap<&str, &LongCaseItem> =
        items.iter().map(|i| (i.creative_id.as_str(), *i)).collect();
    let mut groups: Vec<Vec<String>> = Vec::new();
    let mut last: Option<(f64, bool)> = None;
    for id in actual_discontinuation_order(items) {
        let it = by_id[id.as_str()];
        let key = (it.lifetime_days, it.censored);
        match groups.last_mut() {
            Some(g) if last == Some(key) => g.push(id),
            _ => groups.push(vec![id]),
        }
        last = Some(key);
    }
    groups
}

fn sorted_ids(items: &[&LongCaseItem], key: impl Fn(&LongCaseItem) -> f64) -> Vec<String> {
    let mut v: Vec<&&LongCaseItem> = items.iter().collect();
    v.sort_by(|a, b| key(b).total_cmp(&key(a)).then_with(|| a.creative_id.cmp(&b.creative_id)));
    v.into_iter().map(|i| i.creative_id.clone()).collect()
}

/// NDCG against the oracle order at each checkpoint, over creatives that lived at least that long.
pub fn long_term_case_study(items: &[LongCaseItem], checkpoints: &[u32], threshold: f64) -> Result<LongCaseReport> {
    let mut points = Vec::new();
    let mut skipped = Vec::new();
    for &d in checkpoints {
        let pop: Vec<&LongCaseItem> = items.iter().filter(|i| i.lifetime_days >= f64::from(d)).collect();
        if pop.is_empty() {
            log::info!("long-term checkpoint {d}: no creatives left, skipped");
            skipped.push(d);
            continue;
        }
        let actual = actual_discontinuation_groups(&pop);
        let hazards: Vec<(String, HazardVector)> =
            pop.iter().map(|i| (i.creative_id.clone(), i.hazard.clone())).collect();
        let orders = [
            (METHOD_MODEL, predicted_discontinuation_order(&hazards, threshold)),
            (METHOD_SALES, sorted_ids(&pop, |i| i.total_sales)),
            (METHOD_CPA, sorted_ids(&pop, |i| i.cpa_ratio.key())),
        ];
        for (method, order) in orders {
            points.push(NdcgPoint { checkpoint_day: d, method: method.into(), ndcg: ndcg_tied(&order, &actual)?, n: pop.len() });
        }
    }
    Ok(LongCaseReport { points, skipped })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub days_used: usize,
    pub ci_short: f64,
    pub ci_long: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationSweep {
    pub rows: Vec<AblationRow>,
    pub spearman_short: Option<f64>,
    pub spearman_long: Option<f64>,
}

/// Runs `evaluate(d) -> (ci_short, ci_long)` for every `d` and measures the trend.
pub fn day_ablation_sweep(days: &[usize], mut evaluate: impl FnMut(usize) -> Result<(f64, f64)>) -> Result<AblationSweep> {
    let mut rows = Vec::with_capacity(days.len());
    for &d in days {
        let (ci_short, ci_long) = evaluate(d)?;
        rows.push(AblationRow { days_used: d, ci_short, ci_long });
    }
    let x: Vec<f64> = rows.iter().map(|r| r.days_used as f64).collect();
    let s: Vec<f64> = rows.iter().map(|r| r.ci_short).collect();
    let l: Vec<f64> = rows.iter().map(|r| r.ci_long).collect();
    Ok(AblationSweep { spearman_short: spearman(&x, &s), spearman_long: spearman(&x, &l), rows })
}
