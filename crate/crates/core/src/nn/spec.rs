use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};
use crate::survival::TimeGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    pub(crate) fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    pub(crate) fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub width: usize,
    pub activation: Activation,
}

/// Which optional input blocks are fed to the trunk. Categorical fields are always on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureMask {
    pub text: bool,
    pub image: bool,
    pub stats: bool,
    pub series: bool,
}

impl Default for FeatureMask {
    fn default() -> Self {
        Self::ALL
    }
}

impl FeatureMask {
    pub const ALL: FeatureMask = FeatureMask { text: true, image: true, stats: true, series: true };

    /// All 16 combinations, in bit order (text, image, stats, series).
    pub fn all_masks() -> impl Iterator<Item = FeatureMask> {
        (0u8..16).map(|b| FeatureMask {
            text: b & 1 != 0,
            image: b & 2 != 0,
            stats: b & 4 != 0,
            series: b & 8 != 0,
        })
    }

    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if self.stats {
            parts.push("stats");
        }
        if self.text {
            parts.push("text");
        }
        if self.image {
            parts.push("image");
        }
        if self.series {
            parts.push("series");
        }
        if parts.is_empty() {
            "categorical".to_string()
        } else {
            parts.join("+")
        }
    }
}

/// Widths of the input blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSpec {
    pub text_dim: usize,
    pub image_dim: usize,
    pub stats_dim: usize,
    pub gender_dim: usize,
    pub genre_cardinality: usize,
    pub genre_dim: usize,
    pub series_input: usize,
    pub series_hidden: usize,
    pub mask: FeatureMask,
}

impl Default for InputSpec {
    fn default() -> Self {
        Self {
            text_dim: 16,
            image_dim: 16,
            stats_dim: crate::features::STATS_WIDTH,
            gender_dim: crate::features::GENDER_WIDTH,
            genre_cardinality: 13,
            genre_dim: 8,
            series_input: crate::features::SERIES_WIDTH,
            series_hidden: 10,
            mask: FeatureMask::ALL,
        }
    }
}

impl InputSpec {
    /// `(text, categorical, image, stats, series)` widths after masking.
    pub fn block_widths(&self) -> [usize; 5] {
        let m = self.mask;
        [
            if m.text { self.text_dim } else { 0 },
            self.gender_dim + self.genre_dim,
            if m.image { self.image_dim } else { 0 },
            if m.stats { self.stats_dim } else { 0 },
            if m.series { self.series_hidden } else { 0 },
        ]
    }

    pub fn width(&self) -> usize {
        self.block_widths().iter().sum()
    }
}

/// What a head predicts and how its output is activated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum HeadKind {
    /// Sigmoid hazards, one per grid interval, trained with the hazard NLL.
    Hazard { grid: TimeGrid },
    /// One sigmoid probability trained with binary cross entropy.
    Binary,
    /// One linear output trained with squared error.
    Regression,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: HeadKind,
}

impl HeadSpec {
    pub fn hazard(name: &str, grid: TimeGrid) -> Self {
        Self { name: name.to_string(), kind: HeadKind::Hazard { grid } }
    }

    pub fn width(&self) -> usize {
        match &self.kind {
            HeadKind::Hazard { grid } => grid.len(),
            HeadKind::Binary | HeadKind::Regression => 1,
        }
    }
}

/// Architecture: input blocks, shared trunk, one or two heads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub input: InputSpec,
    pub trunk: Vec<LayerSpec>,
    pub heads: Vec<HeadSpec>,
}

impl ModelSpec {
    pub fn default_trunk() -> Vec<LayerSpec> {
        vec![
            LayerSpec { width: 64, activation: Activation::Relu },
            LayerSpec { width: 64, activation: Activation::Relu },
        ]
    }

    pub fn single_hazard(input: InputSpec, grid: TimeGrid) -> Self {
        Self { input, trunk: Self::default_trunk(), heads: vec![HeadSpec::hazard("hazard", grid)] }
    }

    pub fn two_term(input: InputSpec) -> Self {
        Self {
            input,
            trunk: Self::default_trunk(),
            heads: vec![
                HeadSpec::hazard("short", TimeGrid::short()),
                HeadSpec::hazard("long", TimeGrid::long()),
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.heads.len() {
            1 => {}
            2 => {
                if !self.heads.iter().all(|h| matches!(h.kind, HeadKind::Hazard { .. })) {
                    return contract("a two-head model must have two hazard heads");
                }
            }
            n => return contract(format!("a model has one or two heads, got {n}")),
        }
        if self.trunk.iter().any(|l| l.width == 0) || self.heads.iter().any(|h| h.width() == 0) {
            return contract("layer widths must be positive");
        }
        if self.input.genre_cardinality == 0 {
            return contract("genre table needs at least the unknown row");
        }
        if self.input.width() == 0 {
            return contract("model input is empty");
        }
        Ok(())
    }

    pub fn is_multi_task(&self) -> bool {
        self.heads.len() == 2
    }
}
