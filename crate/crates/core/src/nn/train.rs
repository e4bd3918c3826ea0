use log::debug;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig};
use super::network::{Example, ModelState, Network};
use crate::error::{domain, Error, Result};
use crate::seed::derive_seed;
use crate::survival::LossWeighting;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    pub weighting: LossWeighting,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            epochs: 50,
            adam: AdamConfig::default(),
            seed: 42,
            weighting: LossWeighting::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub initial: ModelState,
    pub last: ModelState,
    /// Lowest validation loss state, or `last` without a validation split.
    pub best: ModelState,
    pub best_epoch: Option<usize>,
    pub trace: Vec<EpochRecord>,
}

/// Mini-batch Adam over `train`, reshuffled every epoch from a seed derived
/// from `cfg.seed`. The last batch may be smaller than `batch_size`.
pub fn train(
    net: &Network,
    train: &[Example],
    validation: Option<&[Example]>,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    if train.is_empty() {
        return domain("training set is empty");
    }
    if cfg.batch_size == 0 {
        return domain("batch size must be positive");
    }
    let initial = net.init_state(derive_seed(cfg.seed, 0));
    let mut state = initial.clone();
    let mut best = state.clone();
    let mut best_loss = f64::INFINITY;
    let mut best_epoch = None;
    let mut trace = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut batch: Vec<&Example> = Vec::with_capacity(cfg.batch_size);

    for epoch in 1..=cfg.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 1_000 + epoch as u64));
        order.sort_unstable();
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| &train[i]));
            let (loss, grads) = net.backward(&state, &batch, &cfg.weighting).map_err(|e| match e {
                Error::Divergence { detail, .. } => diverged(epoch, &trace, &detail),
                other => other,
            })?;
            if !loss.is_finite() {
                return Err(diverged(epoch, &trace, "non-finite training loss"));
            }
            adam_step(&mut state, &grads, &cfg.adam).map_err(|e| match e {
                Error::Divergence { detail, .. } => diverged(epoch, &trace, &detail),
                other => other,
            })?;
            sum += loss * chunk.len() as f64;
        }
        let train_loss = sum / train.len() as f64;
        let val_loss = match validation {
            Some(v) if !v.is_empty() => {
                let l = net.loss(&state, v, &cfg.weighting).map_err(|e| match e {
                    Error::Divergence { detail, .. } => diverged(epoch, &trace, &detail),
                    other => other,
                })?;
                if !l.is_finite() {
                    return Err(diverged(epoch, &trace, "non-finite validation loss"));
                }
                Some(l)
            }
            _ => None,
        };
        if let Some(l) = val_loss {
            if l < best_loss {
                best_loss = l;
                best = state.clone();
                best_epoch = Some(epoch);
            }
        }
        debug!("epoch {epoch}: train {train_loss:.5} val {val_loss:?}");
        trace.push(EpochRecord { epoch, train_loss, val_loss });
    }
    if best_epoch.is_none() {
        best = state.clone();
    }
    Ok(TrainOutcome { initial, last: state, best, best_epoch, trace })
}

fn diverged(epoch: usize, trace: &[EpochRecord], what: &str) -> Error {
    let last = trace
        .last()
        .map_or_else(|| "no finite epoch".to_string(), |r| format!("last finite epoch {}", r.epoch));
    Error::Divergence { epoch, detail: format!("{what}; {last}") }
}
