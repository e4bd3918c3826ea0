//! The experiment config file: one versioned TOML document, unknown keys rejected.

use std::path::{Path, PathBuf};

use adsurv_core::datagen::{GeneratorConfig, Split, SplitFractions};
use adsurv_core::experiment::{run_name, AsOf, EvaluationConfig, ModelKind, RunSpec, TaskMode};
use adsurv_core::nn::{AdamConfig, FeatureMask, InputSpec, TrainConfig};
use adsurv_core::survival::{GridPreset, LossWeighting, WeightMode};
use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub generator: GeneratorConfig,
    pub split: SplitFractions,
    pub model: ModelSection,
    pub training: TrainingSection,
    pub evaluation: EvaluationConfig,
    pub predict: PredictSection,
    pub paths: PathsSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            generator: GeneratorConfig::default(),
            split: SplitFractions::default(),
            model: ModelSection::default(),
            training: TrainingSection::default(),
            evaluation: EvaluationConfig::default(),
            predict: PredictSection::default(),
            paths: PathsSection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    Hazard,
    Classifier,
    Regressor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub objective: Objective,
    /// Grids of a hazard model.
    pub task_mode: TaskMode,
    /// Horizon of a classifier baseline, in days.
    pub horizon: u32,
    /// Grid of a regression baseline: `short` or `long`.
    pub term: GridPreset,
    pub features: FeatureMask,
    /// Daily records read per creative.
    pub as_of_day: usize,
    /// Read all records of creatives that stopped before `as_of_day` instead of dropping them.
    pub clip_as_of: bool,
    pub served_more_than: usize,
    pub genre_dim: usize,
    pub series_hidden: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        let input = InputSpec::default();
        Self {
            objective: Objective::Hazard,
            task_mode: TaskMode::MultiTask,
            horizon: 3,
            term: GridPreset::Short,
            features: FeatureMask::ALL,
            as_of_day: 1,
            clip_as_of: false,
            served_more_than: 0,
            genre_dim: input.genre_dim,
            series_hidden: input.series_hidden,
        }
    }
}

impl ModelSection {
    pub fn kind(&self) -> ModelKind {
        match self.objective {
            Objective::Hazard => ModelKind::Hazard { task: self.task_mode },
            Objective::Classifier => ModelKind::Classifier { horizon: self.horizon },
            Objective::Regressor => ModelKind::Regressor { term: self.term },
        }
    }

    pub fn as_of(&self) -> AsOf {
        if self.clip_as_of {
            AsOf::Clipped(self.as_of_day)
        } else {
            AsOf::Day(self.as_of_day)
        }
    }

    pub fn base_input(&self) -> InputSpec {
        InputSpec { genre_dim: self.genre_dim, series_hidden: self.series_hidden, ..InputSpec::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    pub weighting: WeightMode,
    pub lambda: f64,
}

impl Default for TrainingSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            batch_size: t.batch_size,
            epochs: t.epochs,
            lr: t.adam.lr,
            seed: t.seed,
            weighting: WeightMode::Ctr,
            lambda: t.weighting.lambda,
        }
    }
}

impl TrainingSection {
    pub fn train_config(&self) -> Result<TrainConfig> {
        Ok(TrainConfig {
            batch_size: self.batch_size,
            epochs: self.epochs,
            adam: AdamConfig { lr: self.lr, ..AdamConfig::default() },
            seed: self.seed,
            weighting: LossWeighting::new(self.weighting, self.lambda)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictSection {
    pub threshold: f64,
    pub split: Split,
}

impl Default for PredictSection {
    fn default() -> Self {
        Self { threshold: 0.9, split: Split::Test }
    }
}

/// Output locations; relative paths are resolved against the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    pub dataset_dir: PathBuf,
    pub checkpoint: PathBuf,
    pub predictions: PathBuf,
    pub report_dir: PathBuf,
}

impl Default for PathsSection {
    fn default() -> Self {
        Self {
            dataset_dir: "data".into(),
            checkpoint: "model/checkpoint.bin".into(),
            predictions: "predictions.jsonl".into(),
            report_dir: "reports".into(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).context("parsing config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            bail!("unsupported config version {} (expected {CONFIG_VERSION})", self.version);
        }
        self.generator.validate()?;
        self.evaluation.validate()?;
        self.training.train_config()?;
        if self.training.batch_size == 0 {
            bail!("training.batch_size must be positive");
        }
        if self.model.as_of_day == 0 {
            bail!("model.as_of_day must be at least 1");
        }
        if !(self.predict.threshold > 0.0 && self.predict.threshold < 1.0) {
            bail!("predict.threshold must lie in (0, 1)");
        }
        self.model.kind().spec(self.model.base_input())?;
        Ok(())
    }

    pub fn run_spec(&self) -> RunSpec {
        let m = &self.model;
        let kind = m.kind();
        let as_of = m.as_of();
        RunSpec {
            name: run_name(&kind, m.features, self.training.weighting, as_of, m.served_more_than),
            kind,
            mask: m.features,
            weighting: self.training.weighting,
            as_of,
            served_more_than: m.served_more_than,
        }
    }

    /// SHA-256 of the canonical JSON form of the config.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serialises");
        sha256_hex(&json)
    }

    /// Applies `--seed`, which drives the generator, the split and training.
    pub fn override_seed(&mut self, seed: u64) {
        log::warn!("--seed {seed} overrides generator.seed {} and training.seed {}", self.generator.seed, self.training.seed);
        self.generator.seed = seed;
        self.training.seed = seed;
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Built-in configs of the two reproduction presets.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    match name {
        "offline-suite" => {}
        // More campaigns, so enough test creatives outlive the late checkpoints.
        "case-studies" => cfg.generator.n_campaigns = 2000,
        other => bail!("unknown preset {other:?} (expected offline-suite or case-studies)"),
    }
    Ok(cfg)
}
