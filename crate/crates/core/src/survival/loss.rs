use serde::{Deserialize, Serialize};

use super::hazard::{EventLabels, HazardVector};
use crate::error::{domain, Result};

/// Probabilities are clamped to `[EPS, 1 - EPS]` before taking logs.
pub const EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightMode {
    #[default]
    None,
    Ctr,
    Impression,
}

impl WeightMode {
    pub const ALL: [WeightMode; 3] = [WeightMode::None, WeightMode::Impression, WeightMode::Ctr];

    pub fn name(self) -> &'static str {
        match self {
            WeightMode::None => "none",
            WeightMode::Ctr => "ctr",
            WeightMode::Impression => "imp",
        }
    }
}

/// Per-record loss weighting and the short/long balance of the two-term loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeighting {
    pub mode: WeightMode,
    pub lambda: f64,
}

impl Default for LossWeighting {
    fn default() -> Self {
        Self { mode: WeightMode::None, lambda: 0.5 }
    }
}

impl LossWeighting {
    pub fn new(mode: WeightMode, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(Self { mode, lambda })
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return domain(format!("lambda {lambda} outside [0,1]"));
    }
    Ok(())
}

fn check_pair(h: &HazardVector, y: &EventLabels) {
    // Grid equality is a construction-time contract; a mismatch is a caller bug.
    assert_eq!(h.grid(), y.grid(), "hazard and labels must share a grid");
}

pub(crate) fn clamp_prob(p: f64) -> f64 {
    p.clamp(EPS, 1.0 - EPS)
}

/// `prod_{l<=l'} h_l^{delta_l} (1 - h_l)^{1 - delta_l}`.
///
/// # Panics
/// If the hazard and labels live on different grids.
pub fn likelihood(h: &HazardVector, y: &EventLabels) -> f64 {
    check_pair(h, y);
    (0..y.observed())
        .map(|l| {
            let p = h.values()[l];
            if y.indicator(l) == 1 { p } else { 1.0 - p }
        })
        .product()
}

/// Bernoulli NLL terms of each observed interval.
pub fn interval_nll_terms(h: &HazardVector, y: &EventLabels) -> Vec<f64> {
    check_pair(h, y);
    (0..y.observed())
        .map(|l| {
            let p = clamp_prob(h.values()[l]);
            if y.indicator(l) == 1 { -p.ln() } else { -(1.0 - p).ln() }
        })
        .collect()
}

/// `-sum_{l<=l'} [delta_l log h_l + (1 - delta_l) log(1 - h_l)]` with clamped probabilities.
pub fn negative_log_likelihood(h: &HazardVector, y: &EventLabels) -> f64 {
    interval_nll_terms(h, y).iter().sum()
}

/// Derivative of the NLL with respect to the pre-sigmoid logit of each interval.
///
/// For an unclamped probability the term derivative is `h_l - delta_l`; it
/// is zero wherever clamping is active and for unobserved intervals.
pub fn nll_logit_grad(h: &[f64], y: &EventLabels) -> Vec<f64> {
    let mut g = vec![0.0; h.len()];
    for (l, slot) in g.iter_mut().enumerate().take(y.observed()) {
        let p = h[l];
        if p > EPS && p < 1.0 - EPS {
            *slot = p - f64::from(y.indicator(l));
        }
    }
    g
}

/// Record weight: `1` without weighting, `r + 1` otherwise.
pub fn loss_weight(ratio: f64, mode: WeightMode) -> Result<f64> {
    if mode == WeightMode::None {
        return Ok(1.0);
    }
    if !(0.0..=1.0).contains(&ratio) {
        return domain(format!("weighting ratio {ratio} outside [0,1]"));
    }
    Ok(ratio + 1.0)
}

/// `(r + 1) * loss` for CTR or impression weighting, identity for `None`.
pub fn weighted_loss(base_loss: f64, ratio: f64, mode: WeightMode) -> Result<f64> {
    Ok(loss_weight(ratio, mode)? * base_loss)
}

/// `lambda * short + (1 - lambda) * long`.
pub fn mtl_loss(loss_short: f64, loss_long: f64, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    Ok(lambda * loss_short + (1.0 - lambda) * loss_long)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::survival::grid::TimeGrid;
    use proptest::prelude::*;

    fn g3() -> TimeGrid {
        TimeGrid::new(vec![0.0, 1.0, 2.0, 3.0]).unwrap()
    }

    #[test]
    fn likelihood_examples() {
        let h = HazardVector::new(g3(), vec![0.2, 0.5, 0.7]).unwrap();
        let y = EventLabels::from_delta(g3(), &[0, 1]).unwrap();
        assert!((likelihood(&h, &y) - 0.4).abs() < 1e-15);
        assert!((negative_log_likelihood(&h, &y) - 0.916_290_731_874_155).abs() < 1e-12);

        let zero = HazardVector::new(g3(), vec![0.0; 3]).unwrap();
        let censored = EventLabels::new(g3(), 3, false).unwrap();
        assert_eq!(likelihood(&zero, &censored), 1.0);

        let g1 = TimeGrid::new(vec![0.0, 1.0]).unwrap();
        let one = HazardVector::new(g1.clone(), vec![1.0]).unwrap();
        let ev = EventLabels::from_delta(g1, &[1]).unwrap();
        assert_eq!(likelihood(&one, &ev), 1.0);
        let nll = negative_log_likelihood(&one, &ev);
        assert!(nll > 0.0 && nll < 1e-6);
    }

    #[test]
    fn nll_two_halves() {
        let g = TimeGrid::new(vec![0.0, 1.0, 2.0]).unwrap();
        let h = HazardVector::new(g.clone(), vec![0.5, 0.5]).unwrap();
        let y = EventLabels::from_delta(g, &[0, 1]).unwrap();
        assert!((negative_log_likelihood(&h, &y) - 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn weighting_examples() {
        assert_eq!(weighted_loss(2.0, 0.0, WeightMode::Ctr).unwrap(), 2.0);
        assert_eq!(weighted_loss(2.0, 1.0, WeightMode::Ctr).unwrap(), 4.0);
        assert!((weighted_loss(1.2, 0.5, WeightMode::Ctr).unwrap() - 1.8).abs() < 1e-12);
        assert_eq!(weighted_loss(2.0, 0.7, WeightMode::None).unwrap(), 2.0);
        assert_eq!(weighted_loss(3.0, 1.0, WeightMode::Impression).unwrap(), 6.0);
        assert!(weighted_loss(1.0, 1.5, WeightMode::Ctr).is_err());
        assert!(weighted_loss(1.0, -0.1, WeightMode::Impression).is_err());
    }

    #[test]
    fn mtl_examples() {
        assert_eq!(mtl_loss(1.0, 3.0, 0.5).unwrap(), 2.0);
        assert_eq!(mtl_loss(1.0, 3.0, 1.0).unwrap(), 1.0);
        assert_eq!(mtl_loss(0.0, 0.0, 0.3).unwrap(), 0.0);
        assert!(mtl_loss(1.0, 1.0, 1.1).is_err());
        assert!(LossWeighting::new(WeightMode::Ctr, -0.2).is_err());
        assert_eq!(LossWeighting::default().lambda, 0.5);
    }

    #[test]
    fn logit_grad_zero_past_observation() {
        let y = EventLabels::new(g3(), 2, true).unwrap();
        let g = nll_logit_grad(&[0.3, 0.4, 0.9], &y);
        assert!((g[0] - 0.3).abs() < 1e-15);
        assert!((g[1] - (0.4 - 1.0)).abs() < 1e-15);
        assert_eq!(g[2], 0.0);
    }

    fn pair() -> impl Strategy<Value = (Vec<f64>, usize, bool)> {
        (proptest::collection::vec(EPS..=1.0 - EPS, 5), 1usize..=5, any::<bool>())
    }

    proptest! {
        #[test]
        fn exp_neg_nll_is_likelihood((h, obs, ev) in pair()) {
            let g = TimeGrid::long();
            let hv = HazardVector::new(g.clone(), h).unwrap();
            let y = EventLabels::new(g, obs, ev).unwrap();
            prop_assert!(((-negative_log_likelihood(&hv, &y)).exp() - likelihood(&hv, &y)).abs() < 1e-9);
        }

        #[test]
        fn nll_is_sum_of_bernoulli_terms((h, obs, ev) in pair()) {
            let g = TimeGrid::long();
            let hv = HazardVector::new(g.clone(), h.clone()).unwrap();
            let y = EventLabels::new(g, obs, ev).unwrap();
            let mut manual = 0.0;
            for (l, p) in h.iter().enumerate().take(obs) {
                let d = y.indicator(l) as f64;
                manual += -(d * p.ln() + (1.0 - d) * (1.0 - p).ln());
            }
            prop_assert_eq!(negative_log_likelihood(&hv, &y), interval_nll_terms(&hv, &y).iter().sum::<f64>());
            prop_assert!((negative_log_likelihood(&hv, &y) - manual).abs() < 1e-12);
        }

        #[test]
        fn weighting_is_linear(a in 0.0f64..10.0, b in 0.0f64..10.0, r in 0.0f64..=1.0) {
            prop_assert_eq!(weighted_loss(a, 0.0, WeightMode::Ctr).unwrap(), a);
            let lhs = weighted_loss(a + b, r, WeightMode::Ctr).unwrap();
            let rhs = weighted_loss(a, r, WeightMode::Ctr).unwrap() + weighted_loss(b, r, WeightMode::Ctr).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }

        #[test]
        fn mtl_of_equal_losses(a in 0.0f64..50.0, lambda in 0.0f64..=1.0) {
            prop_assert!((mtl_loss(a, a, lambda).unwrap() - a).abs() < 1e-12);
        }
    }
}
