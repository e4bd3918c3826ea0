//! Config-driven experiment commands over `adsurv-core`: generate a synthetic
//! dataset, train a model, predict, evaluate, and reproduce the full
//! comparison suites in one run.

pub mod commands;
pub mod config;
pub mod dataset;
pub mod model;
pub mod records;

use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand};

use adsurv_core::datagen::Split;
use commands::{EvalMode, EvaluateArgs, PredictArgs, Preset, Workspace};
use config::ExperimentConfig;

#[derive(Debug, Parser)]
#[command(name = "adsurv", version, about = "Discontinuation models for ad creatives")]
pub struct Cli {
    /// TOML experiment config; built-in defaults when absent.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the generator and training seeds.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory that relative config paths resolve against.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// Worker threads; every stage currently runs on one.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SplitArg {
    Train,
    Validation,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Validation => Split::Validation,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate campaigns and write the split dataset.
    Generate,
    /// Train the configured model on the generated dataset.
    Train,
    /// Score one split with a trained checkpoint.
    Predict {
        /// Checkpoint file; `paths.checkpoint` when absent.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Split to score; `predict.split` when absent.
        #[arg(long, value_enum)]
        split: Option<SplitArg>,
        /// Daily records read per creative; defaults to what the model was trained on.
        #[arg(long)]
        as_of_day: Option<usize>,
        /// Hazard threshold for the predicted interval.
        #[arg(long)]
        threshold: Option<f64>,
        /// JSONL output; `paths.predictions` when absent.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Score predictions against the truths of their split.
    Evaluate {
        #[arg(long, value_enum)]
        mode: EvalMode,
        /// Prediction files; repeat for `ablation`.
        #[arg(long = "predictions")]
        predictions: Vec<PathBuf>,
        /// Split whose truths are used; `predict.split` when absent.
        #[arg(long, value_enum)]
        split: Option<SplitArg>,
    },
    /// Generate, train, evaluate and check one reproduction preset.
    Repro {
        #[arg(value_enum)]
        preset: Preset,
    },
}

/// How a successful invocation ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// `repro` finished but at least one acceptance check failed.
    ChecksFailed,
}

impl Outcome {
    pub fn code(self) -> u8 {
        match self {
            Outcome::Success => 0,
            Outcome::ChecksFailed => 2,
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match (&cli.config, &cli.command) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Command::Repro { preset }) => config::preset(preset.name())?,
        (None, _) => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.override_seed(seed);
        cfg.validate()?;
    }
    Ok(cfg)
}

pub fn run(cli: Cli) -> Result<Outcome> {
    if cli.threads == 0 {
        bail!("--threads must be at least 1");
    }
    if cli.threads > 1 {
        log::info!("--threads {}: stages run sequentially on one thread", cli.threads);
    }
    let cfg = load_config(&cli)?;
    std::fs::create_dir_all(&cli.out_dir)?;
    let ws = Workspace::new(cfg, cli.out_dir.clone());
    match cli.command {
        Command::Generate => {
            commands::cmd_generate(&ws)?;
        }
        Command::Train => {
            commands::cmd_train(&ws)?;
        }
        Command::Predict { checkpoint, split, as_of_day, threshold, output } => {
            let args = PredictArgs { checkpoint, split: split.map(Into::into), as_of_day, threshold, output };
            commands::cmd_predict(&ws, &args)?;
        }
        Command::Evaluate { mode, predictions, split } => {
            let args = EvaluateArgs { mode, predictions, split: split.map(Into::into) };
            let reports = commands::cmd_evaluate(&ws, &args)?;
            print!("{}", adsurv_core::eval::summary_text(&reports));
        }
        Command::Repro { preset } => {
            let outcome = commands::cmd_repro(&ws, preset)?;
            for c in &outcome.checks {
                println!("{}", c.line());
            }
            if !outcome.passed() {
                return Ok(Outcome::ChecksFailed);
            }
        }
    }
    Ok(Outcome::Success)
}
