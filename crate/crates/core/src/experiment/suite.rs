//! The offline experiment grid, the two case studies and their acceptance checks.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{predict, train_run, AsOf, ModelKind, Prediction, RunSpec, TaskMode, TrainedModel};
use crate::datagen::{Split, SplitAssignment};
use crate::error::{Error, Result};
use crate::eval::{
    concordance_index, cpa_ratio, day_ablation_sweep, discontinued_in, f1_score, horizon_interval,
    long_term_case_study, short_term_case_study, top_sales_slice, AblationSweep, EvalReport, F1Report, LongCaseItem,
    LongCaseReport, ShortCaseItem, ShortCaseReport, Truth, F1_HORIZONS, METHOD_CPA, METHOD_MODEL, SLICE_ALL,
    SLICE_TOP_SALES,
};
use crate::features::AdCreative;
use crate::nn::{FeatureMask, InputSpec, TrainConfig};
use crate::survival::{decide_discontinuation, risk_score, GridPreset, TimeGrid, WeightMode};

/// Thresholds, horizons and checkpoints of the evaluation protocols.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub top_sales_fraction: f64,
    /// Hazard threshold turning a hazard vector into a predicted interval for F1.
    pub f1_threshold: f64,
    pub f1_horizons: Vec<u32>,
    /// Hazard threshold of both case studies.
    pub case_threshold: f64,
    /// Days of data used by the day-ablation sweep; 0 means no series at day 1.
    pub ablation_days: Vec<usize>,
    /// The long-term case study reads this many days of creatives served longer than that.
    pub long_case_days: usize,
    pub long_case_checkpoints: Vec<u32>,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            top_sales_fraction: 0.25,
            f1_threshold: 0.5,
            f1_horizons: F1_HORIZONS.to_vec(),
            case_threshold: 0.9,
            ablation_days: vec![0, 1, 2, 3, 5, 7, 10],
            long_case_days: 10,
            long_case_checkpoints: (1..=12).map(|k| k * 10).collect(),
        }
    }
}

impl EvaluationConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.top_sales_fraction > 0.0 && self.top_sales_fraction <= 1.0) {
            return bad("top_sales_fraction must lie in (0, 1]");
        }
        if !(self.f1_threshold > 0.0 && self.f1_threshold < 1.0 && self.case_threshold > 0.0 && self.case_threshold < 1.0)
        {
            return bad("hazard thresholds must lie in (0, 1)");
        }
        for &h in &self.f1_horizons {
            horizon_interval(h)?;
        }
        if self.long_case_days == 0 {
            return bad("long_case_days must be positive");
        }
        Ok(())
    }
}

/// The three splits of one dataset.
#[derive(Debug, Clone)]
pub struct SplitData<'a> {
    pub train: Vec<&'a AdCreative>,
    pub validation: Vec<&'a AdCreative>,
    pub test: Vec<&'a AdCreative>,
}

impl<'a> SplitData<'a> {
    pub fn new(creatives: &'a [AdCreative], assignment: &SplitAssignment) -> Self {
        Self {
            train: assignment.select(creatives, Split::Train),
            validation: assignment.select(creatives, Split::Validation),
            test: assignment.select(creatives, Split::Test),
        }
    }
}

/// A trained model with its predictions on the test population.
#[derive(Debug, Clone)]
pub struct ScoredModel {
    pub model: TrainedModel,
    pub predictions: Vec<Prediction>,
}

/// Stable, file-name safe run identifier.
pub fn run_name(kind: &ModelKind, mask: FeatureMask, weighting: WeightMode, as_of: AsOf, served_more_than: usize) -> String {
    let mut name = format!("{}.{}.{}", kind.label(), mask.label(), weighting.name());
    match as_of {
        AsOf::Day(1) => {}
        AsOf::Day(d) => {
            let _ = write!(name, ".day{d}");
        }
        AsOf::Clipped(d) => {
            let _ = write!(name, ".upto{d}");
        }
    }
    if served_more_than > 0 {
        let _ = write!(name, ".served{served_more_than}");
    }
    name
}

fn spec(kind: ModelKind, mask: FeatureMask, weighting: WeightMode, as_of: AsOf, served_more_than: usize) -> RunSpec {
    RunSpec { name: run_name(&kind, mask, weighting, as_of, served_more_than), kind, mask, weighting, as_of, served_more_than }
}

fn hazard(task: TaskMode) -> ModelKind {
    ModelKind::Hazard { task }
}

/// Feature sets compared for the single-task models.
pub fn ablation_masks() -> [FeatureMask; 5] {
    let m = |text, image, series| FeatureMask { text, image, stats: true, series };
    [m(true, false, false), m(false, true, false), m(false, false, true), m(true, true, false), FeatureMask::ALL]
}

const SINGLE_TASKS: [TaskMode; 3] = [TaskMode::Short, TaskMode::Long, TaskMode::Overall];

fn no_series() -> FeatureMask {
    FeatureMask { series: false, ..FeatureMask::ALL }
}

/// Day-ablation run of `task` using `d` days of data.
fn ablation_run(task: TaskMode, d: usize) -> RunSpec {
    match d {
        0 => spec(hazard(task), no_series(), WeightMode::None, AsOf::Day(1), 0),
        1 => spec(hazard(task), FeatureMask::ALL, WeightMode::None, AsOf::Day(1), 0),
        d => spec(hazard(task), FeatureMask::ALL, WeightMode::None, AsOf::Clipped(d), 0),
    }
}

/// Every model of the offline suite, without duplicates.
pub fn offline_plan(eval: &EvaluationConfig) -> Vec<RunSpec> {
    let mut runs = Vec::new();
    for task in SINGLE_TASKS {
        for mask in ablation_masks() {
            runs.push(spec(hazard(task), mask, WeightMode::None, AsOf::Day(1), 0));
        }
    }
    for w in WeightMode::ALL {
        runs.push(spec(hazard(TaskMode::MultiTask), FeatureMask::ALL, w, AsOf::Day(1), 0));
        for task in SINGLE_TASKS {
            runs.push(spec(hazard(task), FeatureMask::ALL, w, AsOf::Day(1), 0));
        }
    }
    for &h in &eval.f1_horizons {
        runs.push(spec(ModelKind::Classifier { horizon: h }, FeatureMask::ALL, WeightMode::Ctr, AsOf::Day(1), 0));
    }
    for term in [GridPreset::Short, GridPreset::Long] {
        runs.push(spec(ModelKind::Regressor { term }, FeatureMask::ALL, WeightMode::Ctr, AsOf::Day(1), 0));
    }
    for &d in &eval.ablation_days {
        for task in [TaskMode::Short, TaskMode::Long] {
            runs.push(ablation_run(task, d));
        }
    }
    dedup(runs)
}

/// Models of the two case studies.
pub fn case_plan(eval: &EvaluationConfig) -> Vec<RunSpec> {
    let d = eval.long_case_days;
    dedup(vec![
        spec(hazard(TaskMode::MultiTask), FeatureMask::ALL, WeightMode::Ctr, AsOf::Day(1), 0),
        spec(hazard(TaskMode::Short), FeatureMask::ALL, WeightMode::Ctr, AsOf::Day(1), 0),
        spec(hazard(TaskMode::MultiTask), FeatureMask::ALL, WeightMode::Ctr, AsOf::Day(d), d),
        spec(hazard(TaskMode::Long), FeatureMask::ALL, WeightMode::Ctr, AsOf::Day(d), d),
    ])
}

fn dedup(runs: Vec<RunSpec>) -> Vec<RunSpec> {
    let mut seen = std::collections::BTreeSet::new();
    runs.into_iter().filter(|r| seen.insert(r.name.clone())).collect()
}

/// Trains `run` and predicts its test population.
pub fn score_run(run: &RunSpec, data: &SplitData<'_>, base: &InputSpec, cfg: &TrainConfig) -> Result<ScoredModel> {
    let model = train_run(run, &data.train, &data.validation, base, cfg)?;
    let predictions = predict(&model, &run.population(&data.test))?;
    Ok(ScoredModel { model, predictions })
}

fn score_all(plan: &[RunSpec], data: &SplitData<'_>, base: &InputSpec, cfg: &TrainConfig) -> Result<Vec<ScoredModel>> {
    plan.iter()
        .enumerate()
        .map(|(i, run)| {
            log::info!("[{}/{}] {}", i + 1, plan.len(), run.name);
            score_run(run, data, base, cfg)
        })
        .collect()
}

/// One concordance value of one model on one grid and slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiRow {
    pub run: String,
    pub grid: String,
    pub slice: String,
    pub ci: f64,
    pub n_pairs: u64,
    pub flag: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F1Row {
    pub run: String,
    pub horizon: u32,
    pub report: F1Report,
}

#[derive(Debug, Clone)]
pub struct OfflineResults {
    pub models: Vec<ScoredModel>,
    pub ci: Vec<CiRow>,
    pub f1: Vec<F1Row>,
    pub ablation: AblationSweep,
}

impl OfflineResults {
    pub fn ci_of(&self, run: &str, grid: GridPreset, slice: &str) -> Option<f64> {
        self.ci.iter().find(|r| r.run == run && r.grid == grid.name() && r.slice == slice).map(|r| r.ci)
    }

    pub fn f1_of(&self, run: &str, horizon: u32) -> Option<f64> {
        self.f1.iter().find(|r| r.run == run && r.horizon == horizon).map(|r| r.report.f1)
    }

    pub fn reports(&self, fingerprint: &str) -> Vec<EvalReport> {
        let mut out: Vec<EvalReport> = self
            .ci
            .iter()
            .map(|r| EvalReport {
                metric: format!("ci:{}:{}", r.grid, r.run),
                slice: r.slice.clone(),
                value: r.ci,
                n: r.n_pairs,
                flag: r.flag.clone(),
                config_fingerprint: fingerprint.into(),
            })
            .collect();
        for r in &self.f1 {
            out.push(EvalReport {
                metric: format!("f1@{}d:{}", r.horizon, r.run),
                slice: SLICE_ALL.into(),
                value: r.report.f1,
                n: r.report.true_positive + r.report.false_positive + r.report.false_negative,
                flag: if r.report.undefined { "undefined".into() } else { String::new() },
                config_fingerprint: fingerprint.into(),
            });
        }
        for row in &self.ablation.rows {
            for (grid, v) in [("short", row.ci_short), ("long", row.ci_long)] {
                out.push(EvalReport {
                    metric: format!("ablation-ci:{grid}:days={}", row.days_used),
                    slice: SLICE_ALL.into(),
                    value: v,
                    n: 0,
                    flag: String::new(),
                    config_fingerprint: fingerprint.into(),
                });
            }
        }
        out
    }

    fn model(&self, name: &str) -> Result<&ScoredModel> {
        self.models
            .iter()
            .find(|m| m.model.run.name == name)
            .ok_or_else(|| Error::Contract(format!("no model named {name}")))
    }
}

/// CI rows of a hazard model on every grid it provides, for all creatives and the top-sales slice.
pub fn ci_rows(run: &RunSpec, predictions: &[Prediction], test: &[&AdCreative], top_fraction: f64) -> Result<Vec<CiRow>> {
    let ModelKind::Hazard { task } = run.kind else {
        return Ok(Vec::new());
    };
    let pop = aligned(run, predictions, test)?;
    let top = top_sales_slice(&pop, top_fraction);
    let mut rows = Vec::new();
    for &preset in task.grids() {
        let grid = preset.grid();
        let mut risks = Vec::with_capacity(pop.len());
        for p in predictions {
            let h = p.hazard_on(&run.kind, preset)?.ok_or_else(|| Error::Contract(format!("{} has no {preset:?} hazards", run.name)))?;
            risks.push(risk_score(&h));
        }
        let truths: Vec<Truth> = pop.iter().map(|c| Truth::of(c).on_grid(&grid)).collect();
        let top_risks: Vec<f64> = top.iter().map(|&i| risks[i]).collect();
        let top_truths: Vec<Truth> = top.iter().map(|&i| truths[i]).collect();
        for (slice, r, t) in [(SLICE_ALL, &risks, &truths), (SLICE_TOP_SALES, &top_risks, &top_truths)] {
            let row = match concordance_index(r, t) {
                Ok(c) => CiRow { run: run.name.clone(), grid: preset.name().into(), slice: slice.into(), ci: c.value, n_pairs: c.admissible, flag: String::new() },
                Err(Error::Undefined(_)) => CiRow { run: run.name.clone(), grid: preset.name().into(), slice: slice.into(), ci: f64::NAN, n_pairs: 0, flag: "undefined".into() },
                Err(e) => return Err(e),
            };
            rows.push(row);
        }
    }
    Ok(rows)
}

/// The population of `run` in `test`, checked to line up with `predictions`.
pub fn aligned<'a>(run: &RunSpec, predictions: &[Prediction], test: &[&'a AdCreative]) -> Result<Vec<&'a AdCreative>> {
    let pop = run.population(test);
    if pop.len() != predictions.len() || pop.iter().zip(predictions).any(|(c, p)| c.creative_id != p.creative_id) {
        return Err(Error::Contract(format!(
            "{}: {} predictions do not line up with {} creatives",
            run.name,
            predictions.len(),
            pop.len()
        )));
    }
    Ok(pop)
}

/// Whether `kind` makes a prediction about the interval ending at `horizon`.
pub fn covers_horizon(kind: &ModelKind, horizon: u32) -> bool {
    let Ok((grid, _)) = horizon_interval(horizon) else {
        return false;
    };
    match kind {
        ModelKind::Hazard { task: TaskMode::MultiTask } => true,
        ModelKind::Hazard { task: TaskMode::Short } => grid == TimeGrid::short(),
        ModelKind::Hazard { task: TaskMode::Long } => grid == TimeGrid::long(),
        ModelKind::Hazard { task: TaskMode::Overall } => false,
        ModelKind::Classifier { horizon: h } => *h == horizon,
        ModelKind::Regressor { term } => term.grid() == grid,
    }
}

/// F1 of one model at `horizon` over its test population.
pub fn f1_row(run: &RunSpec, predictions: &[Prediction], test: &[&AdCreative], horizon: u32, threshold: f64) -> Result<F1Row> {
    let (grid, l) = horizon_interval(horizon)?;
    let predicted =
        predictions.iter().map(|p| p.positive_at(&run.kind, horizon, threshold)).collect::<Result<Vec<bool>>>()?;
    let actual: Vec<bool> = aligned(run, predictions, test)?.iter().map(|c| discontinued_in(Truth::of(c), &grid, l)).collect();
    Ok(F1Row { run: run.name.clone(), horizon, report: f1_score(&predicted, &actual)? })
}

/// Models whose F1 is reported: the CTR-weighted single-task hazard models and every baseline.
fn is_f1_model(run: &RunSpec) -> bool {
    run.as_of == AsOf::Day(1)
        && run.mask == FeatureMask::ALL
        && match run.kind {
            ModelKind::Hazard { task } => run.weighting == WeightMode::Ctr && matches!(task, TaskMode::Short | TaskMode::Long),
            _ => true,
        }
}

fn evaluate_offline(models: Vec<ScoredModel>, test: &[&AdCreative], eval: &EvaluationConfig) -> Result<OfflineResults> {
    let mut ci = Vec::new();
    let mut f1 = Vec::new();
    for m in &models {
        if m.model.run.as_of == AsOf::Day(1) {
            ci.extend(ci_rows(&m.model.run, &m.predictions, test, eval.top_sales_fraction)?);
        }
        if is_f1_model(&m.model.run) {
            for &h in &eval.f1_horizons {
                if covers_horizon(&m.model.run.kind, h) {
                    f1.push(f1_row(&m.model.run, &m.predictions, test, h, eval.f1_threshold)?);
                }
            }
        }
    }
    let mut results = OfflineResults { models, ci, f1, ablation: AblationSweep { rows: vec![], spearman_short: None, spearman_long: None } };
    let ablation = day_ablation_sweep(&eval.ablation_days, |d| {
        let mut cis = [0.0; 2];
        for (slot, (task, preset)) in [(TaskMode::Short, GridPreset::Short), (TaskMode::Long, GridPreset::Long)].into_iter().enumerate() {
            let m = results.model(&ablation_run(task, d).name)?;
            let rows = ci_rows(&m.model.run, &m.predictions, test, eval.top_sales_fraction)?;
            cis[slot] = rows
                .iter()
                .find(|r| r.grid == preset.name() && r.slice == SLICE_ALL)
                .map_or(f64::NAN, |r| r.ci);
        }
        Ok((cis[0], cis[1]))
    })?;
    results.ablation = ablation;
    Ok(results)
}

/// Trains and evaluates the whole offline grid on `data`.
pub fn run_offline_suite(
    data: &SplitData<'_>,
    base: &InputSpec,
    cfg: &TrainConfig,
    eval: &EvaluationConfig,
) -> Result<OfflineResults> {
    eval.validate()?;
    let plan = offline_plan(eval);
    let models = score_all(&plan, data, base, cfg)?;
    evaluate_offline(models, &data.test, eval)
}

#[derive(Debug, Clone)]
pub struct CaseResults {
    pub models: Vec<ScoredModel>,
    pub short: Vec<(String, ShortCaseReport)>,
    pub long: Vec<(String, LongCaseReport)>,
}

impl CaseResults {
    pub fn short_of(&self, run: &str) -> Option<&ShortCaseReport> {
        self.short.iter().find(|(n, _)| n == run).map(|(_, r)| r)
    }

    pub fn long_of(&self, run: &str) -> Option<&LongCaseReport> {
        self.long.iter().find(|(n, _)| n == run).map(|(_, r)| r)
    }

    pub fn reports(&self, fingerprint: &str) -> Vec<EvalReport> {
        let mut out = Vec::new();
        for (run, r) in &self.short {
            for (who, s) in [("model", r.model), ("oracle", r.oracle)] {
                for (stat, v, n) in [("mean", s.mean, s.n_finite), ("std", s.std, s.n_finite), ("infinite", s.n_infinite as f64, s.n_infinite)] {
                    out.push(EvalReport {
                        metric: format!("cpa-ratio-{stat}:{who}:{run}"),
                        slice: SLICE_ALL.into(),
                        value: v,
                        n: n as u64,
                        flag: String::new(),
                        config_fingerprint: fingerprint.into(),
                    });
                }
            }
        }
        for (run, r) in &self.long {
            for p in &r.points {
                out.push(EvalReport {
                    metric: format!("ndcg:{}:{run}", p.method),
                    slice: crate::eval::serving_day_slice(p.checkpoint_day),
                    value: p.ndcg,
                    n: p.n as u64,
                    flag: String::new(),
                    config_fingerprint: fingerprint.into(),
                });
            }
        }
        out
    }
}

/// CPA ratios of stopping where a model's short-term hazards first exceed the threshold.
pub fn short_case(run: &RunSpec, predictions: &[Prediction], test: &[&AdCreative], threshold: f64) -> Result<ShortCaseReport> {
    let pop = aligned(run, predictions, test)?;
    let mut items = Vec::with_capacity(pop.len());
    for (c, p) in pop.iter().zip(predictions) {
        let h = p.hazard_on(&run.kind, GridPreset::Short)?.ok_or_else(|| Error::Contract(format!("{} has no short hazards", run.name)))?;
        items.push(ShortCaseItem { creative: c, predicted_interval: decide_discontinuation(&h, threshold), oracle_day: c.lifetime_days as u32 });
    }
    short_term_case_study(&items, &TimeGrid::short())
}

/// Discontinuation-order NDCG of a long-term model against the rule orders.
pub fn long_case(run: &RunSpec, predictions: &[Prediction], test: &[&AdCreative], eval: &EvaluationConfig) -> Result<LongCaseReport> {
    let pop = aligned(run, predictions, test)?;
    let mut items = Vec::with_capacity(pop.len());
    for (c, p) in pop.iter().zip(predictions) {
        let hazard = p.hazard_on(&run.kind, GridPreset::Long)?.ok_or_else(|| Error::Contract(format!("{} has no long hazards", run.name)))?;
        items.push(LongCaseItem {
            creative_id: c.creative_id.clone(),
            lifetime_days: c.lifetime_days,
            censored: c.censored,
            total_sales: c.total_sales,
            cpa_ratio: cpa_ratio(c, run.as_of.resolve(c))?,
            hazard,
        });
    }
    long_term_case_study(&items, &eval.long_case_checkpoints, eval.case_threshold)
}

pub fn run_case_studies(
    data: &SplitData<'_>,
    base: &InputSpec,
    cfg: &TrainConfig,
    eval: &EvaluationConfig,
) -> Result<CaseResults> {
    eval.validate()?;
    let plan = case_plan(eval);
    let models = score_all(&plan, data, base, cfg)?;
    let mut short = Vec::new();
    let mut long = Vec::new();
    for m in &models {
        let run = &m.model.run;
        if run.served_more_than == 0 {
            short.push((run.name.clone(), short_case(run, &m.predictions, &data.test, eval.case_threshold)?));
        } else {
            long.push((run.name.clone(), long_case(run, &m.predictions, &data.test, eval)?));
        }
    }
    Ok(CaseResults { models, short, long })
}

/// Outcome of one acceptance criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub id: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(id: &str, passed: bool, detail: String) -> Self {
        Self { id: id.into(), passed, detail }
    }

    pub fn line(&self) -> String {
        format!("{} criterion {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.id, self.detail)
    }
}

fn hazard_name(task: TaskMode, mask: FeatureMask, w: WeightMode) -> String {
    run_name(&hazard(task), mask, w, AsOf::Day(1), 0)
}

fn ge(a: Option<f64>, b: Option<f64>) -> bool {
    matches!((a, b), (Some(a), Some(b)) if a >= b)
}

fn fmt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |v| format!("{v:.4}"))
}

/// Directional comparisons on the offline suite.
pub fn offline_checks(r: &OfflineResults, eval: &EvaluationConfig) -> Vec<Check> {
    let all = FeatureMask::ALL;
    let none = WeightMode::None;
    let mt = hazard_name(TaskMode::MultiTask, all, none);
    let mt_ctr = hazard_name(TaskMode::MultiTask, all, WeightMode::Ctr);
    let single_overall = hazard_name(TaskMode::Overall, all, none);
    let single_short = hazard_name(TaskMode::Short, all, none);
    let single_long = hazard_name(TaskMode::Long, all, none);
    let stats_text = hazard_name(TaskMode::Short, ablation_masks()[0], none);
    let ov = GridPreset::OverallMerged;

    let mut checks = Vec::new();
    let (a, b) = (r.ci_of(&mt, ov, SLICE_ALL), r.ci_of(&single_overall, ov, SLICE_ALL));
    checks.push(Check::new(
        "6a",
        matches!((a, b), (Some(a), Some(b)) if a >= b + 0.03),
        format!("multi-task overall CI {} vs single-task overall {} (needs gap >= 0.03)", fmt(a), fmt(b)),
    ));
    let (a, b) = (r.ci_of(&single_short, GridPreset::Short, SLICE_ALL), r.ci_of(&stats_text, GridPreset::Short, SLICE_ALL));
    checks.push(Check::new("6b", ge(a, b), format!("all-features short CI {} vs stats+text {}", fmt(a), fmt(b))));
    let (s, l) = (r.ci_of(&single_short, GridPreset::Short, SLICE_ALL), r.ci_of(&single_long, GridPreset::Long, SLICE_ALL));
    checks.push(Check::new(
        "6c",
        s.is_some_and(|v| v >= 0.75) && l.is_some_and(|v| v >= 0.75),
        format!("short CI {} and long CI {} (each needs >= 0.75)", fmt(s), fmt(l)),
    ));

    let mut ok = true;
    let mut detail = Vec::new();
    for preset in [GridPreset::Short, GridPreset::Long, ov] {
        for slice in [SLICE_ALL, SLICE_TOP_SALES] {
            let (a, b) = (r.ci_of(&mt_ctr, preset, slice), r.ci_of(&mt, preset, slice));
            ok &= ge(a, b);
            detail.push(format!("{}/{slice} {} vs {}", preset.name(), fmt(a), fmt(b)));
        }
    }
    checks.push(Check::new("7", ok, format!("CTR-weighted vs unweighted multi-task: {}", detail.join(", "))));

    let mut ok = true;
    let mut detail = Vec::new();
    for &h in &eval.f1_horizons {
        let term = if horizon_interval(h).is_ok_and(|(g, _)| g == TimeGrid::short()) { TaskMode::Short } else { TaskMode::Long };
        let ours = r.f1_of(&hazard_name(term, all, WeightMode::Ctr), h);
        let preset = if term == TaskMode::Short { GridPreset::Short } else { GridPreset::Long };
        let clf = r.f1_of(&run_name(&ModelKind::Classifier { horizon: h }, all, WeightMode::Ctr, AsOf::Day(1), 0), h);
        let reg = r.f1_of(&run_name(&ModelKind::Regressor { term: preset }, all, WeightMode::Ctr, AsOf::Day(1), 0), h);
        let margin = if h >= 30 { 0.10 } else { 0.0 };
        let beats = |x: Option<f64>| matches!((ours, x), (Some(o), Some(x)) if o > x && o - x >= margin);
        ok &= beats(clf) && beats(reg);
        detail.push(format!("{h}d hazard {} classifier {} regression {}", fmt(ours), fmt(clf), fmt(reg)));
    }
    checks.push(Check::new("8", ok, detail.join("; ")));
    checks
}

/// Case-study outcomes of the multi-task model.
pub fn case_checks(r: &CaseResults, eval: &EvaluationConfig) -> Vec<Check> {
    let all = FeatureMask::ALL;
    let mt = hazard_name(TaskMode::MultiTask, all, WeightMode::Ctr);
    let d = eval.long_case_days;
    let mt_long = run_name(&hazard(TaskMode::MultiTask), all, WeightMode::Ctr, AsOf::Day(d), d);
    let mut checks = Vec::new();
    let short = r.short_of(&mt);
    let (m, o) = (short.map(|s| s.model.mean), short.map(|s| s.oracle.mean));
    checks.push(Check::new(
        "9-short",
        matches!((m, o), (Some(m), Some(o)) if (m - o).abs() <= 0.15),
        format!("mean CPA ratio model {} vs oracle {} (needs |diff| <= 0.15)", fmt(m), fmt(o)),
    ));
    let mut ok = r.long_of(&mt_long).is_some();
    let mut detail = Vec::new();
    if let Some(long) = r.long_of(&mt_long) {
        for &day in eval.long_case_checkpoints.iter().filter(|&&c| c >= 30) {
            let (m, c) = (long.get(day, METHOD_MODEL), long.get(day, METHOD_CPA));
            if m.is_none() && c.is_none() {
                continue;
            }
            ok &= ge(m, c);
            detail.push(format!("day {day} {} vs {}", fmt(m), fmt(c)));
        }
    }
    checks.push(Check::new("9-long", ok, format!("model NDCG vs CPA-ratio order: {}", detail.join(", "))));
    checks
}

/// Plain-text tables shaped like the concordance, weighting and F1 comparisons.
pub fn comparison_table(r: &OfflineResults) -> String {
    let mut out = String::new();
    let grids = [GridPreset::Short, GridPreset::Long, GridPreset::OverallMerged];
    let cell = |run: &str, g: GridPreset, s: &str| r.ci_of(run, g, s).map_or_else(|| "     -".into(), |v| format!("{v:.4}"));
    let _ = writeln!(out, "Concordance index (all / top-25%-sales)");
    let _ = writeln!(out, "{:<15} {:<28} {:<8} {:>15} {:>15} {:>15}", "model", "features", "weight", "short", "long", "overall");
    let mut rows: BTreeMap<(String, String, String), [String; 3]> = BTreeMap::new();
    for m in &r.models {
        let run = &m.model.run;
        let ModelKind::Hazard { task } = run.kind else { continue };
        if run.as_of != AsOf::Day(1) {
            continue;
        }
        let family = if task == TaskMode::MultiTask { "multi-task".to_string() } else { format!("single-{}", task.name()) };
        let mut cells = [String::from("-"), String::from("-"), String::from("-")];
        for (i, &g) in grids.iter().enumerate() {
            if task.grids().contains(&g) {
                cells[i] = format!("{}/{}", cell(&run.name, g, SLICE_ALL), cell(&run.name, g, SLICE_TOP_SALES));
            }
        }
        rows.insert((family, run.mask.label(), run.weighting.name().to_string()), cells);
    }
    for ((family, mask, w), c) in rows {
        let _ = writeln!(out, "{family:<15} {mask:<28} {w:<8} {:>15} {:>15} {:>15}", c[0], c[1], c[2]);
    }
    let _ = writeln!(out, "\nF1 at horizon");
    for row in &r.f1 {
        let _ = writeln!(out, "{:<52} {:>3}d  {:.4}{}", row.run, row.horizon, row.report.f1, if row.report.undefined { "  [undefined]" } else { "" });
    }
    let _ = writeln!(out, "\nDays of data used");
    for row in &r.ablation.rows {
        let _ = writeln!(out, "d={:<3} short {:.4}  long {:.4}", row.days_used, row.ci_short, row.ci_long);
    }
    let _ = writeln!(out, "spearman short {} long {}", fmt(r.ablation.spearman_short), fmt(r.ablation.spearman_long));
    out
}
