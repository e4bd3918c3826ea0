//! Losses of the classification and regression baselines.

use crate::error::{domain, Result};
use crate::survival::clamp_prob;

/// `-w [y log p + (1 - y) log(1 - p)]` with `p` clamped away from 0 and 1.
/// `weight` is the record weight, e.g. `r_CTR + 1`.
pub fn binary_cross_entropy(p: f64, y: f64, weight: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return domain(format!("probability {p} outside [0,1]"));
    }
    let p = clamp_prob(p);
    Ok(-weight * (y * p.ln() + (1.0 - y) * (1.0 - p).ln()))
}

/// `w (prediction - y)^2`.
pub fn squared_error(prediction: f64, y: f64, weight: f64) -> f64 {
    weight * (prediction - y).powi(2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bce_examples() {
        assert!((binary_cross_entropy(0.5, 1.0, 1.0).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
        let w = binary_cross_entropy(0.3, 0.0, 2.0).unwrap();
        assert!((w - 2.0 * binary_cross_entropy(0.3, 0.0, 1.0).unwrap()).abs() < 1e-15);
        assert!(binary_cross_entropy(1.0, 1.0, 1.0).unwrap() < 1e-6);
        assert!(binary_cross_entropy(1.2, 1.0, 1.0).is_err());
    }

    #[test]
    fn mse_examples() {
        assert_eq!(squared_error(3.0, 3.0, 1.0), 0.0);
        assert_eq!(squared_error(1.0, 3.0, 1.5), 6.0);
    }
}
