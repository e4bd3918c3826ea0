//! Model families, dataset preparation, training runs and predictions.

mod suite;

pub use suite::*;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::eval::{discontinued_in, horizon_interval, Truth};
use crate::features::{build_input, percentile, AdCreative, FeatureContext, GenreVocab, Normalizers};
use crate::nn::{
    train, Checkpoint, EpochRecord, Example, FeatureMask, HeadKind, HeadSpec, HeadTarget, InputSpec, ModelSpec,
    TrainConfig,
};
use crate::survival::{labels_from_lifetime, merge_two_term, GridPosition, GridPreset, HazardVector, TimeGrid, WeightMode};

/// Which hazard grid(s) a survival model is trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskMode {
    Short,
    Long,
    Overall,
    MultiTask,
}

impl TaskMode {
    pub const ALL: [TaskMode; 4] = [TaskMode::Short, TaskMode::Long, TaskMode::Overall, TaskMode::MultiTask];

    pub fn name(self) -> &'static str {
        match self {
            TaskMode::Short => "short",
            TaskMode::Long => "long",
            TaskMode::Overall => "overall",
            TaskMode::MultiTask => "multi-task",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.name() == s)
    }

    /// Grids whose hazards the model can produce; multi-task merges its two heads.
    pub fn grids(self) -> &'static [GridPreset] {
        match self {
            TaskMode::Short => &[GridPreset::Short],
            TaskMode::Long => &[GridPreset::Long],
            TaskMode::Overall => &[GridPreset::OverallMerged],
            TaskMode::MultiTask => &[GridPreset::Short, GridPreset::Long, GridPreset::OverallMerged],
        }
    }
}

/// Output objective of a model sharing the common trunk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "objective")]
pub enum ModelKind {
    Hazard { task: TaskMode },
    /// Predicts discontinuation inside the interval ending at `horizon`.
    Classifier { horizon: u32 },
    /// Predicts the lifetime, capped at the grid end and divided by it.
    Regressor { term: GridPreset },
}

impl ModelKind {
    pub fn label(&self) -> String {
        match self {
            ModelKind::Hazard { task } => format!("hazard-{}", task.name()),
            ModelKind::Classifier { horizon } => format!("classifier-{horizon}d"),
            ModelKind::Regressor { term } => format!("regressor-{}", term.name()),
        }
    }

    pub fn spec(&self, input: InputSpec) -> Result<ModelSpec> {
        let spec = match self {
            ModelKind::Hazard { task: TaskMode::Short } => ModelSpec::single_hazard(input, TimeGrid::short()),
            ModelKind::Hazard { task: TaskMode::Long } => ModelSpec::single_hazard(input, TimeGrid::long()),
            ModelKind::Hazard { task: TaskMode::Overall } => ModelSpec::single_hazard(input, TimeGrid::overall_merged()),
            ModelKind::Hazard { task: TaskMode::MultiTask } => ModelSpec::two_term(input),
            ModelKind::Classifier { horizon } => {
                horizon_interval(*horizon)?;
                ModelSpec {
                    input,
                    trunk: ModelSpec::default_trunk(),
                    heads: vec![HeadSpec { name: format!("discontinue-{horizon}d"), kind: HeadKind::Binary }],
                }
            }
            ModelKind::Regressor { term } => {
                regressor_grid(*term)?;
                ModelSpec {
                    input,
                    trunk: ModelSpec::default_trunk(),
                    heads: vec![HeadSpec { name: "lifetime".into(), kind: HeadKind::Regression }],
                }
            }
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn targets(&self, truth: Truth) -> Result<Vec<HeadTarget>> {
        let hazard = |grid: TimeGrid| labels_from_lifetime(&grid, truth.lifetime_days, truth.censored).map(HeadTarget::Hazard);
        Ok(match self {
            ModelKind::Hazard { task: TaskMode::Short } => vec![hazard(TimeGrid::short())?],
            ModelKind::Hazard { task: TaskMode::Long } => vec![hazard(TimeGrid::long())?],
            ModelKind::Hazard { task: TaskMode::Overall } => vec![hazard(TimeGrid::overall_merged())?],
            ModelKind::Hazard { task: TaskMode::MultiTask } => vec![hazard(TimeGrid::short())?, hazard(TimeGrid::long())?],
            ModelKind::Classifier { horizon } => {
                let (grid, l) = horizon_interval(*horizon)?;
                vec![HeadTarget::Binary(f64::from(u8::from(discontinued_in(truth, &grid, l))))]
            }
            ModelKind::Regressor { term } => {
                let grid = regressor_grid(*term)?;
                vec![HeadTarget::Regression(truth.lifetime_days.min(grid.end()) / grid.end())]
            }
        })
    }
}

fn regressor_grid(term: GridPreset) -> Result<TimeGrid> {
    match term {
        GridPreset::Short | GridPreset::Long => Ok(term.grid()),
        GridPreset::OverallMerged => Err(Error::Config("regression baselines exist for the short and long terms".into())),
    }
}

/// How many daily records a prediction may read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "rule", content = "day")]
pub enum AsOf {
    /// Exactly this many records; creatives with fewer are an error.
    Day(usize),
    /// This many records, or all of them for creatives that stopped earlier.
    Clipped(usize),
}

impl AsOf {
    pub fn resolve(self, creative: &AdCreative) -> usize {
        match self {
            AsOf::Day(d) => d,
            AsOf::Clipped(d) => d.min(creative.daily.len()),
        }
    }

    pub fn nominal(self) -> usize {
        match self {
            AsOf::Day(d) | AsOf::Clipped(d) => d,
        }
    }
}

/// Everything that identifies one trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub name: String,
    pub kind: ModelKind,
    pub mask: FeatureMask,
    pub weighting: WeightMode,
    pub as_of: AsOf,
    /// Only creatives served for more than this many days take part.
    pub served_more_than: usize,
}

impl RunSpec {
    pub fn new(name: impl Into<String>, kind: ModelKind) -> Self {
        Self {
            name: name.into(),
            kind,
            mask: FeatureMask::ALL,
            weighting: WeightMode::None,
            as_of: AsOf::Day(1),
            served_more_than: 0,
        }
    }

    pub fn population<'a>(&self, creatives: &[&'a AdCreative]) -> Vec<&'a AdCreative> {
        creatives.iter().copied().filter(|c| c.daily.len() > self.served_more_than).collect()
    }
}

/// Vocabulary, normalisers and the impression normaliser, all from the training split.
pub fn feature_context(train: &[&AdCreative], as_of: AsOf) -> Result<FeatureContext> {
    if train.is_empty() {
        return domain("cannot fit features on an empty training split");
    }
    let imps: Vec<f64> = train.iter().map(|c| c.total_impressions() as f64).collect();
    Ok(FeatureContext {
        vocab: GenreVocab::from_creatives(train.iter().copied()),
        normalizers: Normalizers::fit(train.iter().copied(), as_of.nominal()),
        p95_impressions: percentile(&imps, 0.95),
    })
}

/// Input widths for `creatives` under `mask`, other sizes taken from `base`.
pub fn input_spec(base: &InputSpec, ctx: &FeatureContext, sample: &AdCreative, mask: FeatureMask) -> InputSpec {
    InputSpec {
        text_dim: sample.text_embedding.len(),
        image_dim: sample.image_embedding.len(),
        genre_cardinality: ctx.vocab.cardinality(),
        mask,
        ..base.clone()
    }
}

pub fn build_examples(creatives: &[&AdCreative], run: &RunSpec, ctx: &FeatureContext) -> Result<Vec<Example>> {
    creatives
        .iter()
        .map(|c| {
            Ok(Example {
                id: c.creative_id.clone(),
                input: build_input(c, run.as_of.resolve(c), ctx)?,
                targets: run.kind.targets(Truth::of(c))?,
                ctr: c.overall_ctr(),
                impression_ratio: crate::features::impression_weight(c.total_impressions(), ctx.p95_impressions),
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub run: RunSpec,
    pub checkpoint: Checkpoint,
    pub context: FeatureContext,
    pub trace: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
}

/// Trains `run` on its population of `train`, keeping the best validation-loss state.
pub fn train_run(
    run: &RunSpec,
    train_split: &[&AdCreative],
    validation: &[&AdCreative],
    base_input: &InputSpec,
    cfg: &TrainConfig,
) -> Result<TrainedModel> {
    let train_pop = run.population(train_split);
    let val_pop = run.population(validation);
    let context = feature_context(&train_pop, run.as_of)?;
    let input = input_spec(base_input, &context, train_pop[0], run.mask);
    let spec = run.kind.spec(input)?;
    let net = crate::nn::Network::new(spec.clone())?;
    let train_ex = build_examples(&train_pop, run, &context)?;
    let val_ex = build_examples(&val_pop, run, &context)?;
    let cfg = TrainConfig { weighting: crate::survival::LossWeighting { mode: run.weighting, ..cfg.weighting }, ..cfg.clone() };
    let out = train(&net, &train_ex, (!val_ex.is_empty()).then_some(&val_ex[..]), &cfg)?;
    log::info!("trained {} on {} creatives (best epoch {:?})", run.name, train_ex.len(), out.best_epoch);
    Ok(TrainedModel {
        run: run.clone(),
        checkpoint: Checkpoint::new(spec, out.best),
        context,
        trace: out.trace,
        best_epoch: out.best_epoch,
    })
}

/// Head outputs of one creative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub creative_id: String,
    pub as_of_day: usize,
    pub heads: Vec<Vec<f64>>,
}

impl Prediction {
    /// Hazards on `grid`, when the model family provides them.
    pub fn hazard_on(&self, kind: &ModelKind, grid: GridPreset) -> Result<Option<HazardVector>> {
        let ModelKind::Hazard { task } = kind else {
            return Ok(None);
        };
        let hv = |g: TimeGrid, i: usize| HazardVector::new(g, self.heads[i].clone());
        Ok(match (task, grid) {
            (TaskMode::Short, GridPreset::Short) | (TaskMode::MultiTask, GridPreset::Short) => Some(hv(TimeGrid::short(), 0)?),
            (TaskMode::Long, GridPreset::Long) => Some(hv(TimeGrid::long(), 0)?),
            (TaskMode::MultiTask, GridPreset::Long) => Some(hv(TimeGrid::long(), 1)?),
            (TaskMode::Overall, GridPreset::OverallMerged) => Some(hv(TimeGrid::overall_merged(), 0)?),
            (TaskMode::MultiTask, GridPreset::OverallMerged) => {
                Some(merge_two_term(&hv(TimeGrid::short(), 0)?, &hv(TimeGrid::long(), 1)?)?)
            }
            _ => None,
        })
    }

    /// Predicted positive for the interval ending at `horizon`: hazard models use the
    /// first interval above `threshold`; classifiers `p > 0.5`; regressors the
    /// interval holding the predicted lifetime.
    pub fn positive_at(&self, kind: &ModelKind, horizon: u32, threshold: f64) -> Result<bool> {
        let (grid, l) = horizon_interval(horizon)?;
        Ok(match kind {
            ModelKind::Hazard { .. } => {
                let preset = if grid == TimeGrid::short() { GridPreset::Short } else { GridPreset::Long };
                self.hazard_on(kind, preset)?
                    .is_some_and(|h| crate::survival::decide_discontinuation(&h, threshold) == Some(l))
            }
            ModelKind::Classifier { horizon: h } => *h == horizon && self.heads[0][0] > 0.5,
            ModelKind::Regressor { term } => {
                let g = regressor_grid(*term)?;
                g == grid && regression_interval(&g, self.heads[0][0]) == l
            }
        })
    }
}

/// Interval containing a normalised lifetime prediction, clamped onto the grid.
pub fn regression_interval(grid: &TimeGrid, normalised: f64) -> usize {
    let day = (normalised * grid.end()).clamp(grid.start(), grid.end());
    match grid.interval_index(day.max(f64::MIN_POSITIVE)) {
        Ok(GridPosition::Interval(l)) => l,
        _ => grid.len() - 1,
    }
}

/// Predictions for `creatives`, reading only what `model.run.as_of` allows.
pub fn predict(model: &TrainedModel, creatives: &[&AdCreative]) -> Result<Vec<Prediction>> {
    let net = model.checkpoint.network()?;
    net.check_state(&model.checkpoint.state)?;
    creatives
        .iter()
        .map(|c| {
            let t = model.run.as_of.resolve(c);
            let input = build_input(c, t, &model.context)?;
            Ok(Prediction {
                creative_id: c.creative_id.clone(),
                as_of_day: t,
                heads: net.forward(&model.checkpoint.state, &input)?,
            })
        })
        .collect()
}
