//! Trained-model files: binary checkpoint, a JSON sidecar and the loss trace.

use std::path::{Path, PathBuf};

use adsurv_core::experiment::{RunSpec, TrainedModel};
use adsurv_core::features::io::write_atomic;
use adsurv_core::features::{AdCreative, FeatureContext};
use adsurv_core::nn::{Checkpoint, EpochRecord};
use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelMeta {
    pub run: RunSpec,
    pub context: FeatureContext,
    pub best_epoch: Option<usize>,
    pub config_fingerprint: String,
}

pub fn meta_path(checkpoint: &Path) -> PathBuf {
    checkpoint.with_extension("meta.json")
}

pub fn trace_path(checkpoint: &Path) -> PathBuf {
    checkpoint.with_extension("trace.csv")
}

pub fn trace_csv(trace: &[EpochRecord]) -> Result<Vec<u8>> {
    let mut out = String::from("epoch,train_loss,val_loss\n");
    for r in trace {
        let val = r.val_loss.map_or_else(String::new, |v| v.to_string());
        out.push_str(&format!("{},{},{}\n", r.epoch, r.train_loss, val));
    }
    Ok(out.into_bytes())
}

pub fn save(model: &TrainedModel, checkpoint: &Path, fingerprint: &str) -> Result<()> {
    let meta = ModelMeta {
        run: model.run.clone(),
        context: model.context.clone(),
        best_epoch: model.best_epoch,
        config_fingerprint: fingerprint.into(),
    };
    write_atomic(checkpoint, &model.checkpoint.to_binary()?).with_context(|| format!("writing {}", checkpoint.display()))?;
    write_atomic(&meta_path(checkpoint), &serde_json::to_vec_pretty(&meta)?)?;
    write_atomic(&trace_path(checkpoint), &trace_csv(&model.trace)?)?;
    Ok(())
}

pub fn load(checkpoint: &Path) -> Result<TrainedModel> {
    let ckpt = Checkpoint::load(checkpoint).with_context(|| format!("loading checkpoint {}", checkpoint.display()))?;
    let mp = meta_path(checkpoint);
    let text = std::fs::read_to_string(&mp).with_context(|| format!("reading {}", mp.display()))?;
    let meta: ModelMeta = serde_json::from_str(&text).with_context(|| format!("parsing {}", mp.display()))?;
    Ok(TrainedModel { run: meta.run, checkpoint: ckpt, context: meta.context, trace: Vec::new(), best_epoch: meta.best_epoch })
}

/// Refuses creatives whose input blocks do not have the widths the checkpoint was built for.
pub fn check_widths(model: &TrainedModel, creatives: &[&AdCreative]) -> Result<()> {
    let input = &model.checkpoint.spec.input;
    for c in creatives {
        for (block, have, want) in [
            ("text", c.text_embedding.len(), input.text_dim),
            ("image", c.image_embedding.len(), input.image_dim),
        ] {
            if have != want {
                bail!("{block} block width {have} of creative {} does not match checkpoint width {want}", c.creative_id);
            }
        }
    }
    if model.context.vocab.cardinality() != input.genre_cardinality {
        bail!(
            "genre block cardinality {} does not match checkpoint cardinality {}",
            model.context.vocab.cardinality(),
            input.genre_cardinality
        );
    }
    Ok(())
}
