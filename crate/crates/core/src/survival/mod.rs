//! Time grids, hazard math and the training losses.

mod grid;
mod hazard;
mod loss;

pub use grid::{GridPosition, GridPreset, TimeGrid, LONG_BOUNDS, MERGED_BOUNDS, SHORT_BOUNDS};
pub use hazard::{
    decide_discontinuation, labels_from_lifetime, merge_two_term, risk_score, survival_curve,
    EventLabels, HazardVector, SurvivalCurve,
};
pub use loss::{
    interval_nll_terms, likelihood, loss_weight, mtl_loss, negative_log_likelihood, nll_logit_grad,
    weighted_loss, LossWeighting, WeightMode, EPS,
};
pub(crate) use loss::clamp_prob;
