//! The five subcommands.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use adsurv_core::datagen::Split;
use adsurv_core::eval::{
    cpa_ratio, day_ablation_sweep, long_term_case_study, ndcg_plot_csv, reports_csv, summary_text, EvalReport,
    LongCaseItem, LongCaseReport, NdcgPoint, ShortCaseReport, SLICE_ALL,
};
use adsurv_core::experiment::{
    aligned, case_checks, ci_rows, comparison_table, covers_horizon, f1_row, long_case, offline_checks, predict,
    run_case_studies, run_offline_suite, short_case, train_run, AsOf, CaseResults, Check, CiRow, F1Row, ModelKind,
    OfflineResults, Prediction, RunSpec, ScoredModel, SplitData, TrainedModel,
};
use adsurv_core::features::io::{read_jsonl, to_jsonl, write_atomic};
use adsurv_core::features::AdCreative;
use adsurv_core::survival::GridPreset;
use anyhow::{bail, Context, Result};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::dataset::{simulate, write_dataset, DatasetDir, Manifest};
use crate::model;
use crate::records::{split_records, PredictionRecord};

/// A loaded config together with the directory its relative paths live in.
#[derive(Debug, Clone)]
pub struct Workspace {
    pub cfg: ExperimentConfig,
    pub out_dir: PathBuf,
}

impl Workspace {
    pub fn new(cfg: ExperimentConfig, out_dir: impl Into<PathBuf>) -> Self {
        Self { cfg, out_dir: out_dir.into() }
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.out_dir.join(p)
        }
    }

    pub fn dataset_dir(&self) -> PathBuf {
        self.resolve(&self.cfg.paths.dataset_dir)
    }

    pub fn checkpoint(&self) -> PathBuf {
        self.resolve(&self.cfg.paths.checkpoint)
    }

    pub fn predictions(&self) -> PathBuf {
        self.resolve(&self.cfg.paths.predictions)
    }

    pub fn report_dir(&self) -> PathBuf {
        self.resolve(&self.cfg.paths.report_dir)
    }
}

pub fn cmd_generate(ws: &Workspace) -> Result<Manifest> {
    let (ds, sp) = simulate(&ws.cfg)?;
    let dir = ws.dataset_dir();
    let manifest = write_dataset(&dir, &ws.cfg, &ds, &sp)?;
    log::info!("wrote {} creatives to {}", ds.creatives.len(), dir.display());
    Ok(manifest)
}

pub fn cmd_train(ws: &Workspace) -> Result<TrainedModel> {
    let data = DatasetDir::open(&ws.dataset_dir())?;
    let train = data.load(Split::Train)?;
    let validation = data.load(Split::Validation)?;
    let run = ws.cfg.run_spec();
    let tc = ws.cfg.training.train_config()?;
    let (train, validation): (Vec<&AdCreative>, Vec<&AdCreative>) = (train.iter().collect(), validation.iter().collect());
    let m = train_run(&run, &train, &validation, &ws.cfg.model.base_input(), &tc)
        .with_context(|| format!("training {}", run.name))?;
    let path = ws.checkpoint();
    model::save(&m, &path, &ws.cfg.fingerprint())?;
    log::info!("saved {} (best epoch {:?}) to {}", run.name, m.best_epoch, path.display());
    Ok(m)
}

#[derive(Debug, Clone, Default)]
pub struct PredictArgs {
    pub checkpoint: Option<PathBuf>,
    pub split: Option<Split>,
    pub as_of_day: Option<usize>,
    pub threshold: Option<f64>,
    pub output: Option<PathBuf>,
}

fn flag<T: Copy + std::fmt::Debug + PartialEq>(name: &str, flag: Option<T>, config: T) -> T {
    match flag {
        Some(v) if v != config => {
            log::warn!("--{name} {v:?} overrides the configured {config:?}");
            v
        }
        Some(v) => v,
        None => config,
    }
}

/// The run as applied at prediction time, with `as_of_day` substituted when given.
pub fn prediction_run(trained: &RunSpec, as_of_day: Option<usize>) -> RunSpec {
    let as_of = match (trained.as_of, as_of_day) {
        (a, None) => a,
        (AsOf::Clipped(_), Some(d)) => AsOf::Clipped(d),
        (AsOf::Day(_), Some(d)) => AsOf::Day(d),
    };
    RunSpec { as_of, ..trained.clone() }
}

/// Creatives a run can score: its population, minus those with too few records for a fixed day.
pub fn scorable<'a>(run: &RunSpec, creatives: &'a [AdCreative]) -> Vec<&'a AdCreative> {
    let refs: Vec<&AdCreative> = creatives.iter().collect();
    let pop = run.population(&refs);
    match run.as_of {
        AsOf::Day(d) => {
            let kept: Vec<&AdCreative> = pop.iter().copied().filter(|c| c.daily.len() >= d).collect();
            if kept.len() < pop.len() {
                log::info!("{} creatives have fewer than {d} daily records and are not scored", pop.len() - kept.len());
            }
            kept
        }
        AsOf::Clipped(_) => pop,
    }
}

pub fn predict_records(model: &TrainedModel, run: &RunSpec, creatives: &[&AdCreative], threshold: f64) -> Result<Vec<PredictionRecord>> {
    model::check_widths(model, creatives)?;
    let applied = TrainedModel { run: run.clone(), ..model.clone() };
    let preds = predict(&applied, creatives)?;
    preds.iter().map(|p| PredictionRecord::new(model, run, p, threshold)).collect()
}

pub fn cmd_predict(ws: &Workspace, args: &PredictArgs) -> Result<Vec<PredictionRecord>> {
    let ckpt = args.checkpoint.as_deref().map_or_else(|| ws.checkpoint(), |p| p.to_path_buf());
    let m = model::load(&ckpt)?;
    let which = flag("split", args.split, ws.cfg.predict.split);
    let threshold = flag("threshold", args.threshold, ws.cfg.predict.threshold);
    if !(threshold > 0.0 && threshold < 1.0) {
        bail!("threshold must lie in (0, 1), got {threshold}");
    }
    if args.as_of_day == Some(0) {
        bail!("as-of-day must be at least 1");
    }
    let run = prediction_run(&m.run, args.as_of_day);
    let creatives = DatasetDir::open(&ws.dataset_dir())?.load(which)?;
    let pop = scorable(&run, &creatives);
    let records = predict_records(&m, &run, &pop, threshold)?;
    let out = args.output.as_deref().map_or_else(|| ws.predictions(), |p| p.to_path_buf());
    write_atomic(&out, &to_jsonl(&records)?).with_context(|| format!("writing {}", out.display()))?;
    log::info!("wrote {} predictions to {}", records.len(), out.display());
    Ok(records)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum EvalMode {
    Ci,
    F1,
    Ndcg,
    CaseShort,
    CaseLong,
    Ablation,
}

impl EvalMode {
    pub fn name(self) -> &'static str {
        match self {
            EvalMode::Ci => "ci",
            EvalMode::F1 => "f1",
            EvalMode::Ndcg => "ndcg",
            EvalMode::CaseShort => "case-short",
            EvalMode::CaseLong => "case-long",
            EvalMode::Ablation => "ablation",
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvaluateArgs {
    pub mode: EvalMode,
    /// Defaults to the configured predictions file; `ablation` takes one file per day setting.
    pub predictions: Vec<PathBuf>,
    pub split: Option<Split>,
}

/// Creatives matching `predictions` one to one, in prediction order.
fn truths_for<'a>(predictions: &[Prediction], by_id: &BTreeMap<&str, &'a AdCreative>) -> Result<Vec<&'a AdCreative>> {
    let mut seen = BTreeSet::new();
    predictions
        .iter()
        .map(|p| {
            if !seen.insert(p.creative_id.as_str()) {
                bail!("creative {} is predicted twice", p.creative_id);
            }
            by_id.get(p.creative_id.as_str()).copied().with_context(|| format!("creative {} is not in the evaluated split", p.creative_id))
        })
        .collect()
}

#[derive(Serialize)]
struct F1Line<'a> {
    run: &'a str,
    horizon: u32,
    f1: f64,
    precision: f64,
    recall: f64,
    true_positive: u64,
    false_positive: u64,
    false_negative: u64,
    undefined: bool,
}

#[derive(Serialize)]
struct ShortLine<'a> {
    run: &'a str,
    policy: &'a str,
    mean: f64,
    std: f64,
    n_finite: usize,
    n_infinite: usize,
}

fn csv_of<T: Serialize>(rows: &[T], header: &str) -> Result<Vec<u8>> {
    if rows.is_empty() {
        return Ok(format!("{header}\n").into_bytes());
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(w.into_inner()?)
}

fn ci_reports(rows: &[CiRow], fp: &str) -> Vec<EvalReport> {
    rows.iter()
        .map(|r| EvalReport {
            metric: format!("ci:{}:{}", r.grid, r.run),
            slice: r.slice.clone(),
            value: r.ci,
            n: r.n_pairs,
            flag: r.flag.clone(),
            config_fingerprint: fp.into(),
        })
        .collect()
}

fn f1_lines(rows: &[F1Row]) -> Vec<F1Line<'_>> {
    rows.iter()
        .map(|r| F1Line {
            run: &r.run,
            horizon: r.horizon,
            f1: r.report.f1,
            precision: r.report.precision,
            recall: r.report.recall,
            true_positive: r.report.true_positive,
            false_positive: r.report.false_positive,
            false_negative: r.report.false_negative,
            undefined: r.report.undefined,
        })
        .collect()
}

fn short_lines<'a>(run: &'a str, r: &ShortCaseReport) -> Vec<ShortLine<'a>> {
    [("model", r.model), ("oracle", r.oracle)]
        .into_iter()
        .map(|(policy, s)| ShortLine { run, policy, mean: s.mean, std: s.std, n_finite: s.n_finite, n_infinite: s.n_infinite })
        .collect()
}

/// NDCG of the model order and the two rule orders over every predicted creative.
pub fn ndcg_all(run: &RunSpec, predictions: &[Prediction], test: &[&AdCreative], threshold: f64) -> Result<LongCaseReport> {
    let pop = aligned(run, predictions, test)?;
    let mut items = Vec::with_capacity(pop.len());
    for (c, p) in pop.iter().zip(predictions) {
        let hazard = [GridPreset::OverallMerged, GridPreset::Long, GridPreset::Short]
            .into_iter()
            .find_map(|g| p.hazard_on(&run.kind, g).transpose())
            .transpose()?
            .with_context(|| format!("{} produces no hazards", run.name))?;
        items.push(LongCaseItem {
            creative_id: c.creative_id.clone(),
            lifetime_days: c.lifetime_days,
            censored: c.censored,
            total_sales: c.total_sales,
            cpa_ratio: cpa_ratio(c, run.as_of.resolve(c))?,
            hazard,
        });
    }
    Ok(long_term_case_study(&items, &[0], threshold)?)
}

fn ndcg_reports(points: &[NdcgPoint], run: &str, fp: &str) -> Vec<EvalReport> {
    points
        .iter()
        .map(|p| EvalReport {
            metric: format!("ndcg:{}:{run}", p.method),
            slice: if p.checkpoint_day == 0 { SLICE_ALL.into() } else { adsurv_core::eval::serving_day_slice(p.checkpoint_day) },
            value: p.ndcg,
            n: p.n as u64,
            flag: String::new(),
            config_fingerprint: fp.into(),
        })
        .collect()
}

/// Days of data behind a run in the day-ablation sweep; 0 is day 1 without the series.
pub fn ablation_days(run: &RunSpec) -> usize {
    if run.as_of == AsOf::Day(1) && !run.mask.series {
        0
    } else {
        run.as_of.nominal()
    }
}

pub fn cmd_evaluate(ws: &Workspace, args: &EvaluateArgs) -> Result<Vec<EvalReport>> {
    let eval = &ws.cfg.evaluation;
    let fp = ws.cfg.fingerprint();
    let which = flag("split", args.split, ws.cfg.predict.split);
    let creatives = DatasetDir::open(&ws.dataset_dir())?.load(which)?;
    let by_id: BTreeMap<&str, &AdCreative> = creatives.iter().map(|c| (c.creative_id.as_str(), c)).collect();
    let files = if args.predictions.is_empty() { vec![ws.predictions()] } else { args.predictions.clone() };
    let mut loaded = Vec::new();
    for f in &files {
        let records: Vec<PredictionRecord> = read_jsonl(f).with_context(|| format!("reading {}", f.display()))?;
        let (run, preds) = split_records(&records).with_context(|| format!("in {}", f.display()))?;
        let test = truths_for(&preds, &by_id)?;
        loaded.push((run, preds, test));
    }
    if args.mode != EvalMode::Ablation && loaded.len() != 1 {
        bail!("{} mode takes exactly one predictions file", args.mode.name());
    }
    let (run, preds, test) = &loaded[0];
    let (table, reports) = match args.mode {
        EvalMode::Ci => {
            if !matches!(run.kind, ModelKind::Hazard { .. }) {
                bail!("ci mode needs a hazard model, got {}", run.name);
            }
            let rows = ci_rows(run, preds, test, eval.top_sales_fraction)?;
            (csv_of(&rows, "run,grid,slice,ci,n_pairs,flag")?, ci_reports(&rows, &fp))
        }
        EvalMode::F1 => {
            let mut rows = Vec::new();
            for &h in eval.f1_horizons.iter().filter(|&&h| covers_horizon(&run.kind, h)) {
                rows.push(f1_row(run, preds, test, h, eval.f1_threshold)?);
            }
            if rows.is_empty() {
                bail!("{} predicts none of the configured horizons", run.name);
            }
            let table = csv_of(&f1_lines(&rows), "run,horizon,f1")?;
            let results = OfflineResults { models: Vec::new(), ci: Vec::new(), f1: rows, ablation: empty_sweep() };
            (table, results.reports(&fp))
        }
        EvalMode::Ndcg => {
            let r = ndcg_all(run, preds, test, eval.case_threshold)?;
            (ndcg_plot_csv(&r.points)?, ndcg_reports(&r.points, &run.name, &fp))
        }
        EvalMode::CaseShort => {
            let r = short_case(run, preds, test, eval.case_threshold)?;
            let cases = CaseResults { models: Vec::new(), short: vec![(run.name.clone(), r.clone())], long: Vec::new() };
            (csv_of(&short_lines(&run.name, &r), "run,policy,mean,std,n_finite,n_infinite")?, cases.reports(&fp))
        }
        EvalMode::CaseLong => {
            let r = long_case(run, preds, test, eval)?;
            (ndcg_plot_csv(&r.points)?, ndcg_reports(&r.points, &run.name, &fp))
        }
        EvalMode::Ablation => ablation(&loaded, eval.top_sales_fraction, &fp)?,
    };
    let dir = ws.report_dir();
    let mode = args.mode.name();
    write_atomic(&dir.join(format!("{mode}.csv")), &table)?;
    write_atomic(&dir.join(format!("{mode}.report.csv")), &reports_csv(&reports)?)?;
    write_atomic(&dir.join(format!("{mode}.summary.txt")), summary_text(&reports).as_bytes())?;
    log::info!("wrote {mode} reports to {}", dir.display());
    Ok(reports)
}

fn empty_sweep() -> adsurv_core::eval::AblationSweep {
    adsurv_core::eval::AblationSweep { rows: Vec::new(), spearman_short: None, spearman_long: None }
}

type Loaded<'a> = (RunSpec, Vec<Prediction>, Vec<&'a AdCreative>);

fn ablation(loaded: &[Loaded<'_>], top: f64, fp: &str) -> Result<(Vec<u8>, Vec<EvalReport>)> {
    let mut cells: BTreeMap<(usize, &'static str), f64> = BTreeMap::new();
    for (run, preds, test) in loaded {
        let d = ablation_days(run);
        for row in ci_rows(run, preds, test, top)? {
            let grid = match row.grid.as_str() {
                "short" => "short",
                "long" => "long",
                _ => continue,
            };
            if row.slice != SLICE_ALL {
                continue;
            }
            if cells.insert((d, grid), row.ci).is_some() {
                bail!("more than one {grid} model uses {d} days of data");
            }
        }
    }
    let days: Vec<usize> = cells.keys().map(|k| k.0).collect::<BTreeSet<_>>().into_iter().collect();
    let sweep = day_ablation_sweep(&days, |d| {
        match (cells.get(&(d, "short")).copied(), cells.get(&(d, "long")).copied()) {
            (Some(s), Some(l)) => Ok((s, l)),
            _ => Err(adsurv_core::Error::Contract(format!("day setting {d} needs both a short and a long model"))),
        }
    })?;
    let results = OfflineResults { models: Vec::new(), ci: Vec::new(), f1: Vec::new(), ablation: sweep };
    let mut reports = results.reports(fp);
    for (grid, s) in [("short", results.ablation.spearman_short), ("long", results.ablation.spearman_long)] {
        reports.push(EvalReport {
            metric: format!("ablation-spearman:{grid}"),
            slice: SLICE_ALL.into(),
            value: s.unwrap_or(f64::NAN),
            n: results.ablation.rows.len() as u64,
            flag: if s.is_none() { "undefined".into() } else { String::new() },
            config_fingerprint: fp.into(),
        });
    }
    Ok((csv_of(&results.ablation.rows, "days_used,ci_short,ci_long")?, reports))
}

/// Which pipeline `repro` runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    OfflineSuite,
    CaseStudies,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::OfflineSuite => "offline-suite",
            Preset::CaseStudies => "case-studies",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReproOutcome {
    pub checks: Vec<Check>,
    pub offline: Option<OfflineResults>,
    pub cases: Option<CaseResults>,
}

impl ReproOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn stage<T>(name: &str, r: Result<T>) -> Result<T> {
    r.with_context(|| format!("stage {name} failed"))
}

fn write_models(ws: &Workspace, models: &[ScoredModel], threshold: f64, m: &mut Manifest) -> Result<()> {
    for s in models {
        let run = &s.model.run;
        let records: Vec<PredictionRecord> =
            s.predictions.iter().map(|p| PredictionRecord::new(&s.model, run, p, threshold)).collect::<Result<_>>()?;
        m.write(&ws.out_dir, &format!("predictions/{}.jsonl", run.name), &to_jsonl(&records)?)?;
        let ckpt = ws.out_dir.join("models").join(format!("{}.bin", run.name));
        model::save(&s.model, &ckpt, &ws.cfg.fingerprint())?;
    }
    Ok(())
}

/// Generates data, trains every model of `preset`, evaluates it and writes all artifacts.
pub fn cmd_repro(ws: &Workspace, preset: Preset) -> Result<ReproOutcome> {
    let cfg = &ws.cfg;
    let fp = cfg.fingerprint();
    let (ds, sp) = stage("generate", simulate(cfg))?;
    stage("generate", write_dataset(&ws.dataset_dir(), cfg, &ds, &sp))?;
    let data = SplitData::new(&ds.creatives, &sp);
    let base = cfg.model.base_input();
    let tc = cfg.training.train_config()?;
    let mut manifest = Manifest::new(&format!("repro {}", preset.name()), cfg);
    let report_dir = ws.report_dir();
    // Manifest keys are relative to the output directory when the report directory lies inside it.
    let rel = |f: &str| {
        let p = report_dir.strip_prefix(&ws.out_dir).map_or_else(|_| report_dir.join(f), |d| d.join(f));
        p.to_string_lossy().into_owned()
    };
    let outcome = match preset {
        Preset::OfflineSuite => {
            let r = stage("train", run_offline_suite(&data, &base, &tc, &cfg.evaluation).map_err(Into::into))?;
            stage("predict", write_models(ws, &r.models, cfg.predict.threshold, &mut manifest))?;
            let checks = offline_checks(&r, &cfg.evaluation);
            let reports = r.reports(&fp);
            stage("evaluate", write_reports(ws, &mut manifest, &rel, &reports, &checks))?;
            let ci_table = csv_of(&r.ci, "run,grid,slice,ci,n_pairs,flag")?;
            manifest.write(&ws.out_dir, &rel("ci.csv"), &ci_table)?;
            manifest.write(&ws.out_dir, &rel("f1.csv"), &csv_of(&f1_lines(&r.f1), "run,horizon,f1")?)?;
            manifest.write(&ws.out_dir, &rel("ablation.csv"), &csv_of(&r.ablation.rows, "days_used,ci_short,ci_long")?)?;
            manifest.write(&ws.out_dir, &rel("comparison.txt"), comparison_table(&r).as_bytes())?;
            ReproOutcome { checks, offline: Some(r), cases: None }
        }
        Preset::CaseStudies => {
            let r = stage("train", run_case_studies(&data, &base, &tc, &cfg.evaluation).map_err(Into::into))?;
            stage("predict", write_models(ws, &r.models, cfg.predict.threshold, &mut manifest))?;
            let checks = case_checks(&r, &cfg.evaluation);
            let reports = r.reports(&fp);
            stage("evaluate", write_reports(ws, &mut manifest, &rel, &reports, &checks))?;
            let mut short = Vec::new();
            for (run, s) in &r.short {
                short.extend(short_lines(run, s));
            }
            manifest.write(&ws.out_dir, &rel("case-short.csv"), &csv_of(&short, "run,policy,mean,std,n_finite,n_infinite")?)?;
            for (run, l) in &r.long {
                manifest.write(&ws.out_dir, &rel(&format!("ndcg.{run}.csv")), &ndcg_plot_csv(&l.points)?)?;
            }
            ReproOutcome { checks, offline: None, cases: Some(r) }
        }
    };
    manifest.save(&ws.out_dir)?;
    for c in &outcome.checks {
        log::info!("{}", c.line());
    }
    Ok(outcome)
}

fn write_reports(
    ws: &Workspace,
    manifest: &mut Manifest,
    rel: &dyn Fn(&str) -> String,
    reports: &[EvalReport],
    checks: &[Check],
) -> Result<()> {
    manifest.write(&ws.out_dir, &rel("report.csv"), &reports_csv(reports)?)?;
    manifest.write(&ws.out_dir, &rel("summary.txt"), summary_text(reports).as_bytes())?;
    let lines: String = checks.iter().map(|c| c.line() + "\n").collect();
    manifest.write(&ws.out_dir, &rel("checks.txt"), lines.as_bytes())?;
    Ok(())
}
