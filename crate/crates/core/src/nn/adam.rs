use serde::{Deserialize, Serialize};

use super::network::{Gradients, ModelState};
use crate::error::{contract, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step(state: &mut ModelState, grads: &Gradients, cfg: &AdamConfig) -> Result<()> {
    if !(cfg.lr > 0.0) {
        return Err(Error::Domain(format!("learning rate must be positive, got {}", cfg.lr)));
    }
    if grads.0.len() != state.params.len() {
        return contract("gradient count does not match parameter count");
    }
    if !grads.is_finite() {
        return Err(Error::Divergence { epoch: 0, detail: "non-finite gradient".into() });
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for ((p, g), (m, v)) in state
        .params
        .iter_mut()
        .zip(&grads.0)
        .zip(state.first_moment.iter_mut().zip(state.second_moment.iter_mut()))
    {
        for i in 0..p.data.len() {
            let gi = g.data[i];
            m.data[i] = cfg.beta1 * m.data[i] + (1.0 - cfg.beta1) * gi;
            v.data[i] = cfg.beta2 * v.data[i] + (1.0 - cfg.beta2) * gi * gi;
            let mh = m.data[i] / c1;
            let vh = v.data[i] / c2;
            p.data[i] -= cfg.lr * mh / (vh.sqrt() + cfg.eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Tensor;

    fn scalar_state(x: f64) -> ModelState {
        ModelState {
            names: vec!["x".into()],
            params: vec![Tensor::from_vec(&[1], vec![x])],
            first_moment: vec![Tensor::zeros(&[1])],
            second_moment: vec![Tensor::zeros(&[1])],
            step: 0,
        }
    }

    fn grad(g: f64) -> Gradients {
        Gradients(vec![Tensor::from_vec(&[1], vec![g])])
    }

    #[test]
    fn zero_gradient_is_noop_on_params() {
        let mut s = scalar_state(1.5);
        for _ in 0..7 {
            adam_step(&mut s, &grad(0.0), &AdamConfig::default()).unwrap();
        }
        assert_eq!(s.params[0].data[0], 1.5);
        assert_eq!(s.step, 7);
    }

    #[test]
    fn first_step_moves_by_lr_against_sign() {
        for g in [3.0, -0.02] {
            let mut s = scalar_state(0.0);
            adam_step(&mut s, &grad(g), &AdamConfig::default()).unwrap();
            let moved = s.params[0].data[0];
            assert!((moved + 1e-3 * g.signum()).abs() < 1e-9, "moved {moved}");
        }
    }

    #[test]
    fn two_steps_descend_quadratic() {
        // f(x) = (x - 2)^2, f'(x) = 2(x - 2).
        let f = |x: f64| (x - 2.0).powi(2);
        let mut s = scalar_state(0.0);
        let cfg = AdamConfig { lr: 0.1, ..AdamConfig::default() };
        let start = f(s.params[0].data[0]);
        for _ in 0..2 {
            let x = s.params[0].data[0];
            adam_step(&mut s, &grad(2.0 * (x - 2.0)), &cfg).unwrap();
        }
        let x = s.params[0].data[0];
        assert!(f(x) < start);
        // Both gradients point the same way, so each step moves by about lr.
        assert!((x - 0.2).abs() < 1e-3, "{x}");
    }

    #[test]
    fn rejects_non_finite_gradients() {
        let mut s = scalar_state(0.0);
        assert!(matches!(
            adam_step(&mut s, &grad(f64::NAN), &AdamConfig::default()),
            Err(Error::Divergence { .. })
        ));
        let bad = AdamConfig { lr: 0.0, ..AdamConfig::default() };
        assert!(adam_step(&mut s, &grad(1.0), &bad).is_err());
    }
}
