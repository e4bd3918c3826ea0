//! Dataset directory layout, writing and loading.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use adsurv_core::datagen::{generate, split, Dataset, Split, SplitAssignment};
use adsurv_core::experiment::feature_context;
use adsurv_core::datagen::OracleTrace;
use adsurv_core::features::io::{attach_daily, daily_csv, read_creatives, read_daily_csv, read_jsonl, to_jsonl, write_atomic};
use adsurv_core::features::{AdCreative, GenreVocab, GENDER_WIDTH, SERIES_WIDTH, STATS_WIDTH};
use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use crate::config::{sha256_hex, ExperimentConfig};

pub const DAILY_FILE: &str = "daily.csv";
pub const ORACLE_FILE: &str = "oracle.jsonl";
pub const SPLIT_FILE: &str = "splits.json";
pub const METADATA_FILE: &str = "metadata.json";
pub const MANIFEST_FILE: &str = "manifest.json";

pub fn split_file(which: Split) -> String {
    format!("{}.jsonl", which.name())
}

/// Block widths and training-split statistics needed to build model inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metadata {
    pub text_dim: usize,
    pub image_dim: usize,
    pub stats_dim: usize,
    pub gender_dim: usize,
    pub series_dim: usize,
    pub vocab: GenreVocab,
    pub p95_impressions: f64,
    pub split_counts: BTreeMap<String, usize>,
    pub config_fingerprint: String,
}

/// Checksums of the written files; the only output allowed to differ between reruns is `created_unix`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config_fingerprint: String,
    pub seed: u64,
    pub files: BTreeMap<String, String>,
    pub created_unix: u64,
}

impl Manifest {
    pub fn new(command: &str, cfg: &ExperimentConfig) -> Self {
        Self {
            command: command.into(),
            config_fingerprint: cfg.fingerprint(),
            seed: cfg.generator.seed,
            files: BTreeMap::new(),
            created_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
        }
    }

    /// Writes `bytes` atomically under `root` and records its hash.
    pub fn write(&mut self, root: &Path, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = root.join(rel);
        write_atomic(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.files.insert(rel.to_string(), sha256_hex(bytes));
        Ok(())
    }

    pub fn save(&self, root: &Path) -> Result<()> {
        let bytes = serde_json::to_vec_pretty(self)?;
        write_atomic(&root.join(MANIFEST_FILE), &bytes)?;
        Ok(())
    }
}

fn pretty_json<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(v)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Simulates and splits the configured population.
pub fn simulate(cfg: &ExperimentConfig) -> Result<(Dataset, SplitAssignment)> {
    let ds = generate(&cfg.generator).context("generating campaigns")?;
    let sp = split(&ds.creatives, cfg.split, cfg.generator.seed).context("splitting campaigns")?;
    Ok((ds, sp))
}

/// Writes the dataset files under `dir` and returns their manifest.
pub fn write_dataset(dir: &Path, cfg: &ExperimentConfig, ds: &Dataset, sp: &SplitAssignment) -> Result<Manifest> {
    let mut manifest = Manifest::new("generate", cfg);
    let mut counts = BTreeMap::new();
    for which in Split::ALL {
        let rows: Vec<AdCreative> =
            sp.select(&ds.creatives, which).into_iter().map(|c| AdCreative { daily: Vec::new(), ..c.clone() }).collect();
        counts.insert(which.name().to_string(), rows.len());
        manifest.write(dir, &split_file(which), &to_jsonl(&rows)?)?;
    }
    manifest.write(dir, DAILY_FILE, &daily_csv(&ds.creatives)?)?;
    manifest.write(dir, ORACLE_FILE, &to_jsonl(&ds.traces)?)?;
    manifest.write(dir, SPLIT_FILE, &pretty_json(sp)?)?;

    let train = sp.select(&ds.creatives, Split::Train);
    let ctx = feature_context(&train, cfg.model.as_of())?;
    let first = train.first().context("training split is empty")?;
    let meta = Metadata {
        text_dim: first.text_embedding.len(),
        image_dim: first.image_embedding.len(),
        stats_dim: STATS_WIDTH,
        gender_dim: GENDER_WIDTH,
        series_dim: SERIES_WIDTH,
        vocab: ctx.vocab,
        p95_impressions: ctx.p95_impressions,
        split_counts: counts,
        config_fingerprint: cfg.fingerprint(),
    };
    manifest.write(dir, METADATA_FILE, &pretty_json(&meta)?)?;
    manifest.save(dir)?;
    Ok(manifest)
}

/// A dataset directory on disk.
#[derive(Debug, Clone)]
pub struct DatasetDir {
    pub root: PathBuf,
}

impl DatasetDir {
    pub fn open(root: &Path) -> Result<Self> {
        if !root.join(MANIFEST_FILE).is_file() {
            bail!("no dataset at {} (run `adsurv generate` first)", root.display());
        }
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn metadata(&self) -> Result<Metadata> {
        let path = self.root.join(METADATA_FILE);
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn manifest(&self) -> Result<Manifest> {
        let text = std::fs::read_to_string(self.root.join(MANIFEST_FILE))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Creatives of one split with their daily rows from the CSV.
    pub fn load(&self, which: Split) -> Result<Vec<AdCreative>> {
        let path = self.root.join(split_file(which));
        let mut creatives = read_creatives(&path).with_context(|| format!("reading {}", path.display()))?;
        let daily = read_daily_csv(&self.root.join(DAILY_FILE)).context("reading daily rows")?;
        attach_daily(&mut creatives, daily).with_context(|| format!("attaching daily rows to {}", path.display()))?;
        Ok(creatives)
    }

    pub fn oracle(&self) -> Result<Vec<OracleTrace>> {
        Ok(read_jsonl(&self.root.join(ORACLE_FILE))?)
    }
}
