use std::fs;

use rlad_core::config::ExperimentConfig;
use rlad_core::pipeline::{self, read_signals_tsf, run_experiment, RunReport, SELECTOR_NAME};
use rlad_core::{DetectorKind, Error};

fn small(dir: &std::path::Path, extra: &str) -> ExperimentConfig {
    let text = format!(
        "[data]\nnormal_len = 1500\ntest_len = 400\n\
         [detectors]\nusad_epochs = 2\nknn_n_neighbors = 1,5\niforest_n_estimators = 10\niforest_max_features = 0.5,1.0\nosvm_nu = 0.1,0.5\n\
         [tsf]\nn_trees = 10\n[dqn]\ntotal_steps = 1200\n[output]\ndir = {}\n{extra}",
        dir.display()
    );
    ExperimentConfig::from_ini_str(&text).unwrap()
}

#[test]
fn full_run_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path(), "");
    let report = run_experiment(&cfg).unwrap();
    assert_eq!(report.systems.len(), 7);
    assert_eq!(report.systems[6].system, SELECTOR_NAME);
    assert_eq!(report.flagged_per_detector, report.anomalous_windows);
    for rel in [
        "config.ini",
        "test_series.csv",
        "windows_test.csv",
        "tuning.json",
        "signals.csv",
        "signals_tsf.csv",
        "tsf/split.json",
        "policy.bin",
        "training_log.csv",
        "evaluation.csv",
        "report.json",
        "metrics.csv",
        "metrics.txt",
        "plots/f1.svg",
        "plots/training.svg",
        "manifest.json",
    ] {
        assert!(dir.path().join(rel).exists(), "{rel}");
    }
    for k in DetectorKind::ALL {
        assert!(dir.path().join(format!("models/{}.json", k.slug())).exists());
        assert!(dir.path().join(format!("scores/{}.csv", k.slug())).exists());
        assert!(dir.path().join(format!("tsf/{}.json", k.slug())).exists());
    }
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config_hash"], cfg.hash());
    assert_eq!(manifest["status"], "ok");
    assert!(manifest["artifacts"]["report.json"].is_string());

    let loaded = RunReport::load(dir.path().join("report.json")).unwrap();
    assert_eq!(loaded, report);
    let (table, preds, mask) = read_signals_tsf(dir.path().join("signals_tsf.csv")).unwrap();
    assert_eq!(table.len(), report.windows);
    assert_eq!(preds.len(), 6);
    let train = (0.2 * report.windows as f64).round() as usize;
    assert_eq!(mask.iter().filter(|&&m| m == 1).count(), train);
}

#[test]
fn rerun_gives_byte_identical_report() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_experiment(&small(a.path(), "")).unwrap();
    run_experiment(&small(b.path(), "")).unwrap();
    for rel in ["report.json", "metrics.csv", "evaluation.csv", "policy.bin", "signals_tsf.csv"] {
        assert_eq!(fs::read(a.path().join(rel)).unwrap(), fs::read(b.path().join(rel)).unwrap(), "{rel}");
    }
}

#[test]
fn gtruth_only_mode_runs_and_is_labelled() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_experiment(&small(dir.path(), "[reward]\nmode = gtruth_only\n")).unwrap();
    assert_eq!(report.reward_mode, "gtruth_only");
}

#[test]
fn stage_failure_names_stage_and_keeps_partials() {
    let dir = tempfile::tempdir().unwrap();
    // 400 test points at rate 0.001 round to zero anomalies.
    let cfg = small(dir.path(), "[inject]\nrate = 0.001\n");
    match run_experiment(&cfg) {
        Err(Error::Stage { stage, .. }) => assert_eq!(stage, "inject"),
        other => panic!("expected stage error, got {other:?}"),
    }
    assert!(dir.path().join("config.ini").exists());
    let manifest = fs::read_to_string(dir.path().join("manifest.json")).unwrap();
    assert!(manifest.contains("failed"));
}

#[test]
fn stages_compose_without_persistence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path(), "");
    let prep = pipeline::prepare(&cfg).unwrap();
    let det = pipeline::run_detectors(&cfg, &prep).unwrap();
    assert!(det.outputs.iter().all(|o| o.flagged() == prep.test_windows.anomaly_count()));
    let table = rlad_core::signals::assemble(&prep.test_windows, &det.outputs).unwrap();
    let tsf = pipeline::run_tsf(&cfg, &table).unwrap();
    assert_eq!(tsf.predictions.len(), 6);
    assert!(fs::read_dir(dir.path()).map(|d| d.count() == 0).unwrap_or(true));
}
