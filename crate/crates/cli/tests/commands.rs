use std::path::Path;
use std::process::Command;

use adsurv::commands::*;
use adsurv::config::ExperimentConfig;
use adsurv::dataset::{DatasetDir, MANIFEST_FILE};
use adsurv::model;
use adsurv::records::hazard_widths;
use adsurv_core::datagen::Split;
use adsurv_core::nn::Network;
use adsurv_core::seed::derive_seed;
use adsurv_core::survival::WeightMode;

fn small() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.generator.n_campaigns = 40;
    cfg.training.epochs = 2;
    cfg
}

fn generated(cfg: ExperimentConfig, dir: &Path) -> Workspace {
    let ws = Workspace::new(cfg, dir);
    cmd_generate(&ws).unwrap();
    ws
}

fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn generate_writes_disjoint_splits_reproducibly() {
    let tmp = tempfile::tempdir().unwrap();
    let a = generated(small(), &tmp.path().join("a/nested/dir"));
    let b = generated(small(), &tmp.path().join("b"));
    let (da, db) = (DatasetDir::open(&a.dataset_dir()).unwrap(), DatasetDir::open(&b.dataset_dir()).unwrap());
    let (ma, mb) = (da.manifest().unwrap(), db.manifest().unwrap());
    assert_eq!(ma.files, mb.files);
    assert_eq!(ma.files.len(), 7);
    for name in ma.files.keys() {
        assert_eq!(read(&da.root.join(name)), read(&db.root.join(name)), "{name}");
    }

    let splits: Vec<_> = Split::ALL.iter().map(|&s| da.load(s).unwrap()).collect();
    let mut ids = std::collections::BTreeSet::new();
    let mut campaigns = std::collections::BTreeMap::new();
    for (s, creatives) in Split::ALL.iter().zip(&splits) {
        assert!(!creatives.is_empty());
        for c in creatives {
            assert!(ids.insert(c.creative_id.clone()), "{} in two splits", c.creative_id);
            assert_eq!(*campaigns.entry(c.campaign_id.clone()).or_insert(*s), *s);
            assert!(!c.daily.is_empty());
        }
    }
    let meta = da.metadata().unwrap();
    assert_eq!((meta.text_dim, meta.image_dim, meta.stats_dim, meta.series_dim), (16, 16, 6, 2));
    assert_eq!(meta.split_counts.values().sum::<usize>(), ids.len());

    let again = cmd_generate(&a).unwrap();
    assert_eq!(again.files, ma.files);
}

#[test]
fn multi_task_checkpoint_has_short_and_long_heads() {
    let tmp = tempfile::tempdir().unwrap();
    let ws = generated(small(), tmp.path());
    let m = cmd_train(&ws).unwrap();
    assert_eq!(hazard_widths(&m), [4, 5]);
    let loaded = model::load(&ws.checkpoint()).unwrap();
    assert_eq!(loaded.checkpoint, m.checkpoint);
    let trace = String::from_utf8(read(&model::trace_path(&ws.checkpoint()))).unwrap();
    assert_eq!(trace.lines().next(), Some("epoch,train_loss,val_loss"));
    assert_eq!(trace.lines().count(), 3);
}

#[test]
fn zero_epochs_keep_the_initial_state() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small();
    cfg.training.epochs = 0;
    let ws = generated(cfg.clone(), tmp.path());
    let m = cmd_train(&ws).unwrap();
    let net = Network::new(m.checkpoint.spec.clone()).unwrap();
    assert_eq!(m.checkpoint.state, net.init_state(derive_seed(cfg.training.seed, 0)));
    let trace = String::from_utf8(read(&model::trace_path(&ws.checkpoint()))).unwrap();
    assert_eq!(trace, "epoch,train_loss,val_loss\n");
}

#[test]
fn weighting_changes_the_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let mut bytes = Vec::new();
    for w in [WeightMode::Ctr, WeightMode::None] {
        let mut cfg = small();
        cfg.training.weighting = w;
        let ws = generated(cfg, &tmp.path().join(format!("{w:?}")));
        cmd_train(&ws).unwrap();
        bytes.push(read(&ws.checkpoint()));
    }
    assert_ne!(bytes[0], bytes[1]);
}

/// Rewrites every daily row after `day` with wild but valid values.
fn poison_daily_after(csv_path: &Path, day: u32) {
    let text = String::from_utf8(read(csv_path)).unwrap();
    let mut out = String::new();
    for (i, line) in text.lines().enumerate() {
        let cols: Vec<&str> = line.split(',').collect();
        if i > 0 && cols[1].parse::<u32>().unwrap() > day {
            out.push_str(&format!("{},{},987654321,98765432,9876543,123456789.5\n", cols[0], cols[1]));
        } else {
            out.push_str(line);
            out.push('\n');
        }
    }
    std::fs::write(csv_path, out).unwrap();
}

#[test]
fn predictions_ignore_rows_after_the_as_of_day() {
    let tmp = tempfile::tempdir().unwrap();
    let ws = generated(small(), tmp.path());
    cmd_train(&ws).unwrap();
    for d in [1usize, 3] {
        let clean_out = tmp.path().join(format!("clean{d}.jsonl"));
        let dirty_out = tmp.path().join(format!("dirty{d}.jsonl"));
        let args = |out: &Path| PredictArgs { as_of_day: Some(d), output: Some(out.to_path_buf()), ..Default::default() };
        let clean = cmd_predict(&ws, &args(&clean_out)).unwrap();
        assert!(clean.iter().all(|r| r.as_of_day == d));
        let daily = ws.dataset_dir().join("daily.csv");
        let original = read(&daily);
        poison_daily_after(&daily, d as u32);
        cmd_predict(&ws, &args(&dirty_out)).unwrap();
        std::fs::write(&daily, original).unwrap();
        assert_eq!(read(&clean_out), read(&dirty_out), "as-of day {d}");
    }
}

#[test]
fn prediction_records_carry_hazards_risk_and_interval() {
    let tmp = tempfile::tempdir().unwrap();
    let ws = generated(small(), tmp.path());
    cmd_train(&ws).unwrap();
    let records = cmd_predict(&ws, &PredictArgs::default()).unwrap();
    let first = read(&ws.predictions());
    cmd_predict(&ws, &PredictArgs::default()).unwrap();
    assert_eq!(first, read(&ws.predictions()));
    for r in &records {
        assert_eq!(r.threshold, 0.9);
        assert_eq!(r.heads.len(), 2);
        assert_eq!(r.short_hazard.as_ref().unwrap().len(), 4);
        assert_eq!(r.long_hazard.as_ref().unwrap().len(), 5);
        assert_eq!(r.overall_hazard.as_ref().unwrap().len(), 8);
        assert!(r.risk_score.unwrap() < 0.0);
        if let Some(i) = &r.predicted_interval {
            assert!(r.overall_hazard.as_ref().unwrap()[i.index] > 0.9);
        }
    }
    let low = cmd_predict(&ws, &PredictArgs { threshold: Some(0.01), ..Default::default() }).unwrap();
    assert!(low.iter().all(|r| r.predicted_interval.as_ref().is_some_and(|i| i.index == 0)));
}

#[test]
fn width_mismatch_names_the_block() {
    let tmp = tempfile::tempdir().unwrap();
    let ws = generated(small(), tmp.path());
    cmd_train(&ws).unwrap();
    let test = ws.dataset_dir().join("test.jsonl");
    let text = String::from_utf8(read(&test)).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut v: serde_json::Value = serde_json::from_str(&lines[0]).unwrap();
    v["image_embedding"].as_array_mut().unwrap().pop();
    lines[0] = v.to_string();
    std::fs::write(&test, lines.join("\n") + "\n").unwrap();
    let err = cmd_predict(&ws, &PredictArgs::default()).unwrap_err();
    assert!(format!("{err:#}").contains("image block width 15"), "{err:#}");
}

#[test]
fn evaluate_modes_write_their_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let ws = generated(small(), tmp.path());
    cmd_train(&ws).unwrap();
    cmd_predict(&ws, &PredictArgs::default()).unwrap();
    let eval = |mode| cmd_evaluate(&ws, &EvaluateArgs { mode, predictions: vec![], split: None });
    let ci = eval(EvalMode::Ci).unwrap();
    assert_eq!(ci.len(), 6);
    let table = String::from_utf8(read(&ws.report_dir().join("ci.csv"))).unwrap();
    assert!(table.starts_with("run,grid,slice,ci,n_pairs,flag\n"));
    for grid in ["short", "long", "overall-merged"] {
        assert!(ci.iter().any(|r| r.metric.starts_with(&format!("ci:{grid}:")) && r.slice == "top-25%-sales"));
    }
    let f1 = eval(EvalMode::F1).unwrap();
    let horizons: Vec<&str> = f1.iter().map(|r| r.metric.split(':').next().unwrap()).collect();
    assert_eq!(horizons, ["f1@3d", "f1@7d", "f1@30d", "f1@90d"]);
    eval(EvalMode::CaseShort).unwrap();
    eval(EvalMode::CaseLong).unwrap();
    let plot = String::from_utf8(read(&ws.report_dir().join("case-long.csv"))).unwrap();
    assert!(plot.starts_with("checkpoint_day,method,ndcg\n"));
    let ndcg = eval(EvalMode::Ndcg).unwrap();
    assert_eq!(ndcg.len(), 3);
    assert!(ws.report_dir().join("ci.summary.txt").is_file());
    let single = eval(EvalMode::Ablation).unwrap();
    assert!(single.iter().any(|r| r.metric == "ablation-ci:short:days=1"));

    let mut files = Vec::new();
    for (task, d) in [("short", 1), ("long", 1), ("short", 3), ("long", 3)] {
        let mut cfg = ws.cfg.clone();
        cfg.model.task_mode = adsurv_core::experiment::TaskMode::from_name(task).unwrap();
        cfg.model.as_of_day = d;
        cfg.model.clip_as_of = true;
        cfg.paths.checkpoint = format!("m/{task}{d}.bin").into();
        let w = Workspace::new(cfg, tmp.path());
        cmd_train(&w).unwrap();
        let out = tmp.path().join(format!("{task}{d}.jsonl"));
        cmd_predict(&w, &PredictArgs { output: Some(out.clone()), ..Default::default() }).unwrap();
        files.push(out);
    }
    let rows = cmd_evaluate(&ws, &EvaluateArgs { mode: EvalMode::Ablation, predictions: files, split: None }).unwrap();
    assert!(rows.iter().any(|r| r.metric == "ablation-ci:short:days=3"));
    assert!(rows.iter().any(|r| r.metric == "ablation-spearman:long"));
}

#[test]
fn evaluate_rejects_predictions_from_another_split() {
    let tmp = tempfile::tempdir().unwrap();
    let ws = generated(small(), tmp.path());
    cmd_train(&ws).unwrap();
    cmd_predict(&ws, &PredictArgs::default()).unwrap();
    let err = cmd_evaluate(&ws, &EvaluateArgs { mode: EvalMode::Ci, predictions: vec![], split: Some(Split::Train) }).unwrap_err();
    assert!(format!("{err:#}").contains("not in the evaluated split"));
}

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_adsurv"));
    c.env("RUST_LOG", "error");
    c
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "[training]\nepoch = 3\n").unwrap();
    let out = bin().args(["--config", bad.to_str().unwrap(), "generate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown field"));

    let out = bin().args(["--out-dir", tmp.path().join("empty").to_str().unwrap(), "train"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(bin().arg("no-such-command").output().unwrap().status.code(), Some(1));
    assert_eq!(bin().arg("--help").output().unwrap().status.code(), Some(0));

    let cfg = tmp.path().join("tiny.toml");
    std::fs::write(&cfg, "version = 1\n[generator]\nn_campaigns = 30\n[training]\nepochs = 1\n").unwrap();
    let dir = tmp.path().join("repro");
    let out = bin()
        .args(["--config", cfg.to_str().unwrap(), "--out-dir", dir.to_str().unwrap(), "--seed", "5", "repro", "case-studies"])
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    let all_pass = stdout.lines().all(|l| l.starts_with("PASS"));
    assert!(stdout.contains("criterion 9-short"), "{stdout}");
    assert_eq!(out.status.code(), Some(if all_pass { 0 } else { 2 }));
    assert!(dir.join(MANIFEST_FILE).is_file());
    assert!(dir.join("reports/checks.txt").is_file());
}

#[test]
fn diverging_training_fails_with_the_last_finite_epoch() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small();
    cfg.training.lr = 1e300;
    let ws = generated(cfg, tmp.path());
    let err = cmd_train(&ws).unwrap_err();
    let msg = format!("{err:#}");
    assert!(msg.contains("diverged") && msg.contains("finite epoch"), "{msg}");
}
