//! Discrete-time survival modelling for ad creative discontinuation.
//!
//! The crate is split along the lifecycle of an experiment:
//!
//! - [`survival`]: time grids, hazard vectors, event labels and every loss
//!   used for training (hazard NLL, two-term multi-task, CTR weighting).
//! - [`nn`]: a small dense/embedding/recurrent network with exact
//!   reverse-mode gradients and Adam.
//! - [`features`]: creative records and the encoders that turn them into
//!   network inputs.
//! - [`datagen`]: a seeded generator of synthetic campaigns whose lifetimes
//!   come from a cut-out / wear-out serving simulation.
//! - [`eval`]: concordance index, F1 at horizon, NDCG orderings and the
//!   CPA-ratio case studies.
//! - [`experiment`]: glue that trains and scores the model grid.

pub mod datagen;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod features;
pub mod nn;
pub mod seed;
pub mod survival;

pub use error::{Error, Result};
