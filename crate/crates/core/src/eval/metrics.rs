use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{contract, domain, Error, Result};
use crate::features::AdCreative;
use crate::survival::{decide_discontinuation, risk_score, GridPosition, HazardVector, TimeGrid};

/// Observed lifetime and whether it was censored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub lifetime_days: f64,
    pub censored: bool,
}

impl Truth {
    pub fn of(creative: &AdCreative) -> Self {
        Self { lifetime_days: creative.lifetime_days, censored: creative.censored }
    }

    /// The same record seen through `grid`: anything past its end is censored there.
    pub fn on_grid(self, grid: &TimeGrid) -> Self {
        if self.lifetime_days > grid.end() {
            Self { lifetime_days: grid.end(), censored: true }
        } else {
            self
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedPrediction {
    pub creative_id: String,
    pub risk_score: f64,
    pub predicted_interval: Option<usize>,
    pub hazard: HazardVector,
}

impl RankedPrediction {
    pub fn from_hazard(creative_id: impl Into<String>, hazard: HazardVector, threshold: f64) -> Self {
        Self {
            creative_id: creative_id.into(),
            risk_score: risk_score(&hazard),
            predicted_interval: decide_discontinuation(&hazard, threshold),
            hazard,
        }
    }
}

/// Harrell's concordance with its integer pair counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Concordance {
    pub value: f64,
    pub concordant: u64,
    pub tied: u64,
    pub admissible: u64,
}

/// Fenwick tree over risk ranks.
struct Fenwick(Vec<u64>);

impl Fenwick {
    fn add(&mut self, mut i: usize) {
        i += 1;
        while i < self.0.len() {
            self.0[i] += 1;
            i += i & i.wrapping_neg();
        }
    }

    /// Count of inserted ranks `< i`.
    fn below(&self, mut i: usize) -> u64 {
        let mut s = 0;
        while i > 0 {
            s += self.0[i];
            i -= i & i.wrapping_neg();
        }
        s
    }
}

/// Harrell's C: a pair is admissible when the shorter lifetime is uncensored and
/// the lifetimes differ; it is concordant when the shorter one has the higher
/// risk, and risk ties count one half.
pub fn concordance_index(risks: &[f64], truths: &[Truth]) -> Result<Concordance> {
    if risks.len() != truths.len() {
        return contract(format!("{} risks for {} truths", risks.len(), truths.len()));
    }
    if risks.iter().any(|r| !r.is_finite()) || truths.iter().any(|t| !t.lifetime_days.is_finite()) {
        return domain("risks and lifetimes must be finite");
    }
    let mut sorted: Vec<f64> = risks.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let rank = |r: f64| sorted.partition_point(|v| *v < r);

    let mut order: Vec<usize> = (0..risks.len()).collect();
    order.sort_by(|&a, &b| truths[b].lifetime_days.total_cmp(&truths[a].lifetime_days));

    let mut tree = Fenwick(vec![0; sorted.len() + 1]);
    let (mut concordant, mut tied, mut admissible) = (0u64, 0u64, 0u64);
    let mut inserted = 0u64;
    let mut g = 0;
    while g < order.len() {
        let t = truths[order[g]].lifetime_days;
        let end = g + order[g..].iter().take_while(|&&i| truths[i].lifetime_days == t).count();
        // Everything in the tree outlived `t`.
        for &i in &order[g..end] {
            if truths[i].censored {
                continue;
            }
            let r = rank(risks[i]);
            let lower = tree.below(r);
            let equal = tree.below(r + 1) - lower;
            concordant += lower;
            tied += equal;
            admissible += inserted;
        }
        for &i in &order[g..end] {
            tree.add(rank(risks[i]));
            inserted += 1;
        }
        g = end;
    }
    if admissible == 0 {
        return Err(Error::Undefined("concordance index has no admissible pairs".into()));
    }
    let value = (concordant as f64 + 0.5 * tied as f64) / admissible as f64;
    Ok(Concordance { value, concordant, tied, admissible })
}

/// Indices of the `ceil(fraction * n)` highest-selling creatives; ties by id.
pub fn top_sales_slice(creatives: &[&AdCreative], fraction: f64) -> Vec<usize> {
    let k = ((fraction.clamp(0.0, 1.0) * creatives.len() as f64).ceil() as usize).min(creatives.len());
    let mut idx: Vec<usize> = (0..creatives.len()).collect();
    idx.sort_by(|&a, &b| {
        creatives[b]
            .total_sales
            .total_cmp(&creatives[a].total_sales)
            .then_with(|| creatives[a].creative_id.cmp(&creatives[b].creative_id))
    });
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F1Report {
    pub true_positive: u64,
    pub false_positive: u64,
    pub false_negative: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Neither true nor predicted positives exist; `f1` is reported as 0.
    pub undefined: bool,
}

/// F1 of the positive class; empty ratios count as 0.
pub fn f1_score(predicted: &[bool], actual: &[bool]) -> Result<F1Report> {
    if predicted.len() != actual.len() {
        return contract(format!("{} predictions for {} labels", predicted.len(), actual.len()));
    }
    let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
    for (&p, &a) in predicted.iter().zip(actual) {
        match (p, a) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
    Ok(F1Report {
        true_positive: tp,
        false_positive: fp,
        false_negative: fn_,
        precision,
        recall,
        f1,
        undefined: tp + fp + fn_ == 0,
    })
}

/// The F1 horizons and the grid whose interval ends at each.
pub const F1_HORIZONS: [u32; 4] = [3, 7, 30, 90];

/// Grid and interval a horizon refers to: short grid up to its end, long grid after.
pub fn horizon_interval(horizon_days: u32) -> Result<(TimeGrid, usize)> {
    let day = f64::from(horizon_days);
    for grid in [TimeGrid::short(), TimeGrid::long()] {
        if day <= grid.end() {
            if let Some(l) = grid.interval_ending_at(day) {
                return Ok((grid, l));
            }
        }
    }
    domain(format!("no short or long interval ends at day {horizon_days}"))
}

/// True when the record is discontinued inside interval `l` of `grid`.
pub fn discontinued_in(truth: Truth, grid: &TimeGrid, l: usize) -> bool {
    let t = truth.on_grid(grid);
    !t.censored && matches!(grid.interval_index(t.lifetime_days), Ok(GridPosition::Interval(k)) if k == l)
}

/// F1 of "discontinued in the interval ending at the horizon" from predicted intervals.
pub fn f1_at_horizon(predicted: &[Option<usize>], truths: &[Truth], horizon_days: u32) -> Result<F1Report> {
    let (grid, l) = horizon_interval(horizon_days)?;
    let pred: Vec<bool> = predicted.iter().map(|p| *p == Some(l)).collect();
    let actual: Vec<bool> = truths.iter().map(|t| discontinued_in(*t, &grid, l)).collect();
    f1_score(&pred, &actual)
}

/// NDCG of `predicted` against `actual`, with gain `n - rank` in `actual`
/// and a `log2(position + 1)` discount.
pub fn ndcg_order(predicted: &[String], actual: &[String]) -> Result<f64> {
    let groups: Vec<Vec<String>> = actual.iter().map(|id| vec![id.clone()]).collect();
    ndcg_tied(predicted, &groups)
}

/// [`ndcg_order`] where `actual` is a sequence of tie groups; members of a
/// group share the gain of the group's mean rank.
pub fn ndcg_tied(predicted: &[String], actual: &[Vec<String>]) -> Result<f64> {
    let n: usize = actual.iter().map(Vec::len).sum();
    let mut gain: BTreeMap<&str, f64> = BTreeMap::new();
    let mut start = 0usize;
    for group in actual {
        let mid = start as f64 + (group.len() as f64 - 1.0) / 2.0;
        for id in group {
            gain.insert(id.as_str(), n as f64 - mid);
        }
        start += group.len();
    }
    if gain.len() != n || predicted.len() != n {
        return contract("orders must be permutations of the same ids");
    }
    if n == 0 {
        return contract("orders are empty");
    }
    let mut dcg = 0.0;
    let mut seen: BTreeMap<&str, ()> = BTreeMap::new();
    for (pos, id) in predicted.iter().enumerate() {
        let Some(&g) = gain.get(id.as_str()) else {
            return contract(format!("{id} missing from the actual order"));
        };
        if seen.insert(id.as_str(), ()).is_some() {
            return contract(format!("{id} appears twice"));
        }
        dcg += g / (pos as f64 + 2.0).log2();
    }
    let mut ideal_gains: Vec<f64> = gain.values().copied().collect();
    ideal_gains.sort_by(|a, b| b.total_cmp(a));
    let ideal: f64 = ideal_gains.iter().enumerate().map(|(pos, g)| g / (pos as f64 + 2.0).log2()).sum();
    Ok(dcg / ideal)
}

/// Order by predicted interval, then by hazard at that interval (descending);
/// creatives with no decision come last by their final hazard; ids break ties.
pub fn predicted_discontinuation_order(items: &[(String, HazardVector)], threshold: f64) -> Vec<String> {
    let keyed: Vec<(&str, usize, f64)> = items
        .iter()
        .map(|(id, h)| {
            let v = h.values();
            match decide_discontinuation(h, threshold) {
                Some(l) => (id.as_str(), l, v[l]),
                None => (id.as_str(), v.len(), v.last().copied().unwrap_or(0.0)),
            }
        })
        .collect();
    let mut idx: Vec<usize> = (0..keyed.len()).collect();
    idx.sort_by(|&a, &b| order_key_cmp(keyed[a], keyed[b]));
    idx.into_iter().map(|i| keyed[i].0.to_string()).collect()
}

pub(crate) fn order_key_cmp(a: (&str, usize, f64), b: (&str, usize, f64)) -> Ordering {
    a.1.cmp(&b.1).then_with(|| b.2.total_cmp(&a.2)).then_with(|| a.0.cmp(b.0))
}

/// Actual CPA over target CPA; spending without converting is infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "value")]
pub enum CpaRatio {
    Finite(f64),
    Infinite,
}

impl CpaRatio {
    pub fn finite(self) -> Option<f64> {
        match self {
            CpaRatio::Finite(v) => Some(v),
            CpaRatio::Infinite => None,
        }
    }

    /// Sort key where infinity exceeds every finite value.
    pub fn key(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

/// Cumulative CPA ratio over the first `as_of_day` records (fewer if the creative stopped earlier).
pub fn cpa_ratio(creative: &AdCreative, as_of_day: usize) -> Result<CpaRatio> {
    if !(creative.target_cpa > 0.0) {
        return domain(format!("{}: target CPA must be positive", creative.creative_id));
    }
    let seen = &creative.daily[..as_of_day.min(creative.daily.len())];
    let spend: f64 = seen.iter().map(|d| d.spend).sum();
    let conv: u64 = seen.iter().map(|d| d.conversions).sum();
    Ok(if spend == 0.0 {
        CpaRatio::Finite(0.0)
    } else if conv == 0 {
        CpaRatio::Infinite
    } else {
        CpaRatio::Finite(spend / conv as f64 / creative.target_cpa)
    })
}

/// Spearman rank correlation with average ranks for ties; `None` for constant input.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn key() -> impl Strategy<Value = (String, usize, f64)> {
        ("[a-c]{1,2}", 0usize..4, prop_oneof![Just(0.5), Just(0.9), 0.0f64..1.0])
    }

    proptest! {
        #[test]
        fn order_comparator_is_antisymmetric_and_transitive(a in key(), b in key(), c in key()) {
            let (ka, kb, kc) = ((a.0.as_str(), a.1, a.2), (b.0.as_str(), b.1, b.2), (c.0.as_str(), c.1, c.2));
            prop_assert_eq!(order_key_cmp(ka, kb), order_key_cmp(kb, ka).reverse());
            if order_key_cmp(ka, kb) != Ordering::Greater && order_key_cmp(kb, kc) != Ordering::Greater {
                prop_assert_ne!(order_key_cmp(ka, kc), Ordering::Greater);
            }
            if order_key_cmp(ka, kb) == Ordering::Equal {
                prop_assert_eq!(ka, kb);
            }
        }
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Some(-1.0));
        assert_eq!(spearman(&[1.0, 2.0], &[5.0, 5.0]), None);
    }
}
