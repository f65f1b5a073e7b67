//! End-to-end experiment runs.
//!
//! Each stage is a plain function so callers can rerun later stages with
//! different settings on the same data. [`run_experiment`] chains them and
//! persists every intermediate artifact plus a manifest of content hashes.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{DataSource, ExperimentConfig};
use crate::detectors::{self, Contamination, DetectorKind, DetectorModel, DetectorOutput, Hyperparams, TuneResult};
use crate::detectors::usad::UsadParams;
use crate::error::{Error, Result};
use crate::inject;
use crate::metrics::{EvalReport, Metrics};
use crate::selector::{DqnPolicy, EvalStep, SelectionEnv, TrainOutcome};
use crate::series::{self, ScalerSpec, TimeSeries, WindowSet};
use crate::signals::{self, SignalTable};
use crate::tsf::{self, Split, TsfModel};
use crate::util;
use crate::POOL_SIZE;

/// Wraps a stage's error with the stage name.
pub fn stage<T>(name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    f().map_err(|e| match e {
        Error::Stage { .. } => e,
        e => Error::Stage { stage: name.to_string(), source: Box::new(e) },
    })
}

#[derive(Clone, Debug)]
pub struct Prepared {
    /// Unscaled test series after injection.
    pub test_raw: TimeSeries,
    pub scaler: ScalerSpec,
    pub normal_windows: WindowSet,
    pub test_windows: WindowSet,
    /// Hash of the labelled test series.
    pub fingerprint: String,
}

pub fn load_partitions(cfg: &ExperimentConfig) -> Result<(TimeSeries, TimeSeries)> {
    match &cfg.data {
        DataSource::Synthetic { normal_len, test_len, generator } => generator.partitions(*normal_len, *test_len),
        DataSource::Csv { normal, test, schema } => {
            Ok((series::load_csv(normal, schema)?, series::load_csv(test, schema)?))
        }
    }
}

pub fn series_fingerprint(ts: &TimeSeries) -> Result<String> {
    let mut buf = Vec::new();
    ts.write_csv(&mut buf)?;
    Ok(util::sha256_hex(&buf))
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let (normal, test) = stage("load", || load_partitions(cfg))?;
    let test_raw = match &cfg.inject {
        Some(plan) => stage("inject", || inject::inject(&test, plan))?,
        None if test.labels.is_some() => test,
        None => {
            return Err(Error::Stage {
                stage: "inject".into(),
                source: Box::new(Error::Config("test data has no labels and injection is disabled".into())),
            })
        }
    };
    stage("window", || {
        let scaler = ScalerSpec::fit(&normal, cfg.scaler)?;
        let normal_windows = series::make_windows(&scaler.transform(&normal)?, &cfg.window)?;
        let test_windows = series::make_windows(&scaler.transform(&test_raw)?, &cfg.window)?;
        let fingerprint = series_fingerprint(&test_raw)?;
        Ok(Prepared { test_raw, scaler, normal_windows, test_windows, fingerprint })
    })
}

/// Untuned settings for one detector under this configuration.
pub fn base_params(cfg: &ExperimentConfig, kind: DetectorKind) -> Hyperparams {
    let d = &cfg.detectors;
    match Hyperparams::default_for(kind).with_seed(d.seed) {
        Hyperparams::Osvm { nu, gamma, .. } => Hyperparams::Osvm { nu, gamma, max_train: d.osvm_max_train },
        Hyperparams::IForest { n_estimators, max_features, seed, .. } => {
            Hyperparams::IForest { n_estimators, max_features, max_samples: d.iforest_max_samples, seed }
        }
        Hyperparams::Usad { params, .. } => Hyperparams::Usad {
            params: UsadParams { epochs: d.usad_epochs, batch_size: d.usad_batch_size, ..params },
            max_train: d.usad_max_train,
        },
        other => other,
    }
}

#[derive(Clone, Debug)]
pub struct DetectorStage {
    pub contamination: Contamination,
    pub params: Vec<Hyperparams>,
    pub tuning: Vec<Option<TuneResult>>,
    pub models: Vec<DetectorModel>,
    pub outputs: Vec<DetectorOutput>,
}

pub fn fit_and_score(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    kind: DetectorKind,
    contamination: Contamination,
) -> Result<(Hyperparams, Option<TuneResult>, DetectorModel, DetectorOutput)> {
    let base = base_params(cfg, kind);
    let d = &cfg.detectors;
    let tuning = if d.tune && kind.is_tunable() {
        Some(detectors::tune(
            &base,
            &prep.normal_windows,
            &prep.test_windows,
            &prep.test_windows.labels,
            &d.grid,
            contamination,
            d.tune_budget,
            d.seed,
        )?)
    } else {
        None
    };
    let params = tuning.as_ref().map_or(base, |t| t.best.clone());
    let model = DetectorModel::fit(&prep.normal_windows, &params)?;
    let raw = model.score(&prep.test_windows)?;
    let output = detectors::threshold_and_label(kind, &raw, contamination)?;
    Ok((params, tuning, model, output))
}

pub fn run_detectors(cfg: &ExperimentConfig, prep: &Prepared) -> Result<DetectorStage> {
    let contamination = cfg.detectors.contamination.resolve(&prep.test_windows.labels);
    let mut out = DetectorStage { contamination, params: vec![], tuning: vec![], models: vec![], outputs: vec![] };
    for kind in DetectorKind::ALL {
        let (p, t, m, o) = stage(&format!("detector {}", kind.slug()), || fit_and_score(cfg, prep, kind, contamination))?;
        out.params.push(p);
        out.tuning.push(t);
        out.models.push(m);
        out.outputs.push(o);
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct TsfStage {
    pub split: Split,
    /// 1 on the shared ground-truth subset.
    pub gt_mask: Vec<u8>,
    pub models: Vec<TsfModel>,
    /// Correctness predictions on every window, one vector per detector.
    pub predictions: Vec<Vec<u8>>,
    /// Correctness-class metrics on the held-out windows.
    pub test_metrics: Vec<Metrics>,
}

pub fn shared_split(cfg: &ExperimentConfig, table: &SignalTable) -> Result<Split> {
    tsf::stratified_split(&table.ground_truth, cfg.tsf.train_fraction, util::derive_seed(cfg.tsf.params.seed, 0x5f1))
}

pub fn run_tsf(cfg: &ExperimentConfig, table: &SignalTable) -> Result<TsfStage> {
    stage("tsf", || {
        let split = shared_split(cfg, table)?;
        let mut gt_mask = vec![0u8; table.len()];
        split.train.iter().for_each(|&i| gt_mask[i] = 1);
        let mut stage = TsfStage { split, gt_mask, models: vec![], predictions: vec![], test_metrics: vec![] };
        for d in 0..POOL_SIZE {
            let ds = tsf::build_dataset(table, d)?;
            let mut params = cfg.tsf.params.clone();
            params.seed = util::derive_seed(params.seed, d as u64);
            let model = TsfModel::fit(&ds.subset(&stage.split.train), &params)?;
            let pred = model.predict(&ds.features)?;
            let held_pred: Vec<u8> = stage.split.test.iter().map(|&i| pred[i]).collect();
            let held_true: Vec<u8> = stage.split.test.iter().map(|&i| ds.target[i]).collect();
            stage.test_metrics.push(Metrics::compute(&held_pred, &held_true)?);
            stage.models.push(model);
            stage.predictions.push(pred);
        }
        Ok(stage)
    })
}

fn tsf_column(kind: DetectorKind) -> String {
    format!("tsf_{}", kind.slug())
}

/// The signal table followed by one forest-prediction column per detector and the ground-truth mask.
pub fn write_signals_tsf<W: std::io::Write>(table: &SignalTable, predictions: &[Vec<u8>], gt_mask: &[u8], out: W) -> Result<()> {
    let extra: Vec<(String, Vec<u8>)> = DetectorKind::ALL
        .iter()
        .zip(predictions)
        .map(|(&k, p)| (tsf_column(k), p.clone()))
        .chain([("gt_mask".to_string(), gt_mask.to_vec())])
        .collect();
    table.write_csv_with(out, &extra)
}

/// Reads back what [`write_signals_tsf`] wrote: the table, forest predictions and mask.
pub fn read_signals_tsf(path: impl AsRef<Path>) -> Result<(SignalTable, Vec<Vec<u8>>, Vec<u8>)> {
    let bytes = fs::read(path)?;
    let table = SignalTable::read_csv(bytes.as_slice())?;
    let mut rdr = csv::Reader::from_reader(bytes.as_slice());
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse { row: 1, message: format!("missing column `{name}`") })
    };
    let cols: Vec<usize> = DetectorKind::ALL
        .iter()
        .map(|&k| col(&tsf_column(k)))
        .chain([col("gt_mask")])
        .collect::<Result<_>>()?;
    let mut data = vec![Vec::with_capacity(table.len()); cols.len()];
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        for (d, &c) in data.iter_mut().zip(&cols) {
            let v = match rec[c].trim() {
                "0" => 0,
                "1" => 1,
                other => return Err(Error::Parse { row: r + 2, message: format!("expected 0 or 1, got `{other}`") }),
            };
            d.push(v);
        }
    }
    let gt_mask = data.pop().expect("mask column");
    Ok((table, data, gt_mask))
}

#[derive(Clone, Debug)]
pub struct SelectorStage {
    pub policy: DqnPolicy,
    pub training: TrainOutcome,
    pub evaluation: Vec<EvalStep>,
    pub metrics: Metrics,
}

pub fn run_selector(cfg: &ExperimentConfig, table: &SignalTable, tsf: &TsfStage) -> Result<SelectorStage> {
    let mut env = stage("rl-train", || SelectionEnv::new(table, &tsf.predictions, &tsf.gt_mask, cfg.reward.clone()))?;
    let (policy, training) = stage("rl-train", || {
        let mut policy = DqnPolicy::new(env.state_dim(), cfg.dqn.clone())?;
        let training = policy.train(&mut env, cfg.total_steps, &cfg.epsilon)?;
        Ok((policy, training))
    })?;
    stage("evaluate", || {
        let evaluation = policy.evaluate(&env)?;
        let metrics = Metrics::compute(&EvalStep::labels(&evaluation), &table.ground_truth)?;
        Ok(SelectorStage { policy, training, evaluation, metrics })
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TsfSummary {
    pub detector: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TunedSummary {
    pub detector: String,
    pub params: Hyperparams,
    pub tuning_f1: Option<f64>,
}

/// Everything a run reports; serialized deterministically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub name: String,
    pub config_hash: String,
    pub dataset_fingerprint: String,
    pub reward: String,
    pub reward_mode: String,
    pub epsilon: String,
    pub windows: usize,
    pub anomalous_windows: usize,
    pub flagged_per_detector: usize,
    pub systems: Vec<EvalReport>,
    pub tsf: Vec<TsfSummary>,
    pub tuned: Vec<TunedSummary>,
    /// Per-episode training log of the selector.
    pub training: Vec<crate::selector::LogRow>,
}

impl RunReport {
    pub fn system(&self, name: &str) -> Option<&EvalReport> {
        self.systems.iter().find(|s| s.system == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_slice(&fs::read(path)?)?)
    }
}

pub const SELECTOR_NAME: &str = "Proposed";

pub fn build_report(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    det: &DetectorStage,
    tsf: &TsfStage,
    sel: &SelectorStage,
) -> Result<RunReport> {
    let hash = cfg.hash();
    let truth = &prep.test_windows.labels;
    let mut systems = Vec::with_capacity(POOL_SIZE + 1);
    for o in &det.outputs {
        let m = Metrics::compute(&o.labels, truth)?;
        systems.push(EvalReport::new(o.kind.name(), m, &hash, cfg.dqn.seed, &prep.fingerprint));
    }
    systems.push(EvalReport::new(SELECTOR_NAME, sel.metrics.clone(), &hash, cfg.dqn.seed, &prep.fingerprint));
    Ok(RunReport {
        name: cfg.name.clone(),
        config_hash: hash,
        reward: cfg.reward.kind.to_string(),
        reward_mode: cfg.reward.mode.name().to_string(),
        epsilon: cfg.epsilon.describe(),
        dataset_fingerprint: prep.fingerprint.clone(),
        windows: truth.len(),
        anomalous_windows: truth.iter().filter(|&&g| g == 1).count(),
        flagged_per_detector: det.outputs[0].flagged(),
        systems,
        tsf: DetectorKind::ALL
            .iter()
            .zip(&tsf.test_metrics)
            .map(|(k, m)| TsfSummary { detector: k.name().into(), precision: m.precision, recall: m.recall, f1: m.f1 })
            .collect(),
        tuned: DetectorKind::ALL
            .iter()
            .zip(det.params.iter().zip(&det.tuning))
            .map(|(k, (p, t))| TunedSummary {
                detector: k.name().into(),
                params: p.clone(),
                tuning_f1: t.as_ref().map(|t| t.best_f1),
            })
            .collect(),
        training: sel.training.log.clone(),
    })
}

/// Records every file written under the output directory with its SHA-256.
pub struct ArtifactWriter {
    root: PathBuf,
    hashes: BTreeMap<String, String>,
}

impl ArtifactWriter {
    pub fn new(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Self { root, hashes: BTreeMap::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, rel: &str, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, &buf)?;
        self.hashes.insert(rel.to_string(), util::sha256_hex(&buf));
        Ok(())
    }

    pub fn manifest(&self, config_hash: &str, inputs: &BTreeMap<String, String>, failed: Option<&Error>) -> Result<()> {
        let manifest = serde_json::json!({
            "config_hash": config_hash,
            "inputs": inputs,
            "artifacts": self.hashes,
            "status": failed.map_or("ok".to_string(), |e| format!("failed: {e}")),
        });
        fs::write(self.root.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }
}

fn input_hashes(cfg: &ExperimentConfig) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    if let DataSource::Csv { normal, test, .. } = &cfg.data {
        for p in [normal, test] {
            out.insert(p.display().to_string(), util::sha256_hex(&fs::read(p)?));
        }
    }
    Ok(out)
}

/// Runs every stage, persisting artifacts under `cfg.output_dir`.
///
/// On failure the artifacts written so far stay on disk and the manifest
/// records the failing stage.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    let mut w = ArtifactWriter::new(&cfg.output_dir)?;
    let hash = cfg.hash();
    let inputs = input_hashes(cfg)?;
    let result = run_stages(cfg, &mut w);
    w.manifest(&hash, &inputs, result.as_ref().err())?;
    result
}

fn run_stages(cfg: &ExperimentConfig, w: &mut ArtifactWriter) -> Result<RunReport> {
    w.write("config.ini", |b| Ok(b.extend_from_slice(cfg.to_ini().as_bytes())))?;
    let prep = prepare(cfg)?;
    w.write("test_series.csv", |b| prep.test_raw.write_csv(b))?;
    w.write("windows_test.csv", |b| prep.test_windows.write_csv(b))?;

    let det = run_detectors(cfg, &prep)?;
    for (m, o) in det.models.iter().zip(&det.outputs) {
        let slug = o.kind.slug();
        w.write(&format!("models/{slug}.json"), |b| m.write_json(b))?;
        w.write(&format!("scores/{slug}.csv"), |b| o.write_csv(b))?;
    }
    w.write("tuning.json", |b| {
        let trials: BTreeMap<String, &TuneResult> = det
            .tuning
            .iter()
            .zip(DetectorKind::ALL)
            .filter_map(|(t, k)| t.as_ref().map(|t| (k.slug(), t)))
            .collect();
        Ok(serde_json::to_writer_pretty(b, &trials)?)
    })?;

    let table = stage("signals", || signals::assemble(&prep.test_windows, &det.outputs))?;
    w.write("signals.csv", |b| table.write_csv(b))?;

    let tsf = run_tsf(cfg, &table)?;
    for m in &tsf.models {
        w.write(&format!("tsf/{}.json", m.kind.slug()), |b| m.write_json(b))?;
    }
    w.write("tsf/split.json", |b| Ok(serde_json::to_writer_pretty(b, &tsf.split)?))?;
    w.write("signals_tsf.csv", |b| write_signals_tsf(&table, &tsf.predictions, &tsf.gt_mask, b))?;

    let sel = run_selector(cfg, &table, &tsf)?;
    w.write("policy.bin", |b| sel.policy.write_checkpoint(b))?;
    w.write("training_log.csv", |b| sel.training.write_csv(b))?;
    w.write("evaluation.csv", |b| EvalStep::write_csv(&sel.evaluation, b))?;

    let report = build_report(cfg, &prep, &det, &tsf, &sel)?;
    w.write("report.json", |b| Ok(b.extend_from_slice(report.to_json()?.as_bytes())))?;
    stage("report", || {
        for (rel, bytes) in crate::report::render(&[report.clone()], cfg.plots)? {
            w.write(&rel, |b| Ok(b.extend_from_slice(&bytes)))?;
        }
        Ok(())
    })?;
    Ok(report)
}
