//! The six-detector pool behind one fit/score contract, empirical
//! thresholding, and grid search over hyperparameters.

pub mod ecdf;
pub mod iforest;
pub mod knn;
pub mod osvm;
pub mod usad;

use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::Metrics;
use crate::series::{format_value, WindowSet};
use crate::util;

pub use ecdf::{EcdfModel, TailVariant};
pub use iforest::IForestModel;
pub use knn::{KnnMethod, KnnModel};
pub use osvm::OsvmModel;
pub use usad::{UsadModel, UsadParams};

const MODEL_FORMAT: &str = "rlad-detector";
const MODEL_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DetectorKind {
    Knn,
    Copod,
    Ecod,
    Osvm,
    IForest,
    Usad,
}

impl DetectorKind {
    /// Pool order; also the selector's action index.
    pub const ALL: [DetectorKind; 6] = [
        DetectorKind::Knn,
        DetectorKind::Copod,
        DetectorKind::Ecod,
        DetectorKind::Osvm,
        DetectorKind::IForest,
        DetectorKind::Usad,
    ];

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&k| k == self).unwrap()
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Knn => "KNN",
            Self::Copod => "COPOD",
            Self::Ecod => "ECOD",
            Self::Osvm => "OSVM",
            Self::IForest => "IFOREST",
            Self::Usad => "USAD",
        }
    }

    pub fn slug(self) -> String {
        self.name().to_ascii_lowercase()
    }

    pub fn is_tunable(self) -> bool {
        !matches!(self, Self::Copod | Self::Ecod)
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for DetectorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown detector `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Hyperparams {
    Knn { n_neighbors: usize, method: KnnMethod },
    Copod,
    Ecod,
    Osvm { nu: f64, gamma: Option<f64>, max_train: usize },
    IForest { n_estimators: usize, max_features: f64, max_samples: usize, seed: u64 },
    Usad { params: UsadParams, max_train: usize },
}

impl Hyperparams {
    pub fn default_for(kind: DetectorKind) -> Self {
        match kind {
            DetectorKind::Knn => Self::Knn { n_neighbors: 5, method: KnnMethod::Largest },
            DetectorKind::Copod => Self::Copod,
            DetectorKind::Ecod => Self::Ecod,
            DetectorKind::Osvm => Self::Osvm { nu: 0.5, gamma: None, max_train: 2000 },
            DetectorKind::IForest => Self::IForest { n_estimators: 100, max_features: 1.0, max_samples: 256, seed: 0 },
            DetectorKind::Usad => Self::Usad { params: UsadParams::default(), max_train: 0 },
        }
    }

    pub fn kind(&self) -> DetectorKind {
        match self {
            Self::Knn { .. } => DetectorKind::Knn,
            Self::Copod => DetectorKind::Copod,
            Self::Ecod => DetectorKind::Ecod,
            Self::Osvm { .. } => DetectorKind::Osvm,
            Self::IForest { .. } => DetectorKind::IForest,
            Self::Usad { .. } => DetectorKind::Usad,
        }
    }

    /// Re-seeds the stochastic detectors; deterministic ones are unchanged.
    pub fn with_seed(mut self, s: u64) -> Self {
        match &mut self {
            Self::IForest { seed, .. } => *seed = s,
            Self::Usad { params, .. } => params.seed = s,
            _ => {}
        }
        self
    }

    pub fn describe(&self) -> String {
        match self {
            Self::Knn { n_neighbors, method } => format!("n_neighbors={n_neighbors} method={method:?}"),
            Self::Copod | Self::Ecod => String::new(),
            Self::Osvm { nu, .. } => format!("nu={nu}"),
            Self::IForest { n_estimators, max_features, .. } => {
                format!("n_estimators={n_estimators} max_features={max_features}")
            }
            Self::Usad { params, .. } => format!("alpha={} beta={}", params.alpha, params.beta),
        }
    }
}

/// Training rows capped at `max` by an even stride; `0` means no cap.
fn capped(windows: &[Vec<f64>], max: usize) -> Vec<Vec<f64>> {
    if max == 0 || windows.len() <= max {
        return windows.to_vec();
    }
    let stride = windows.len().div_ceil(max);
    windows.iter().step_by(stride).cloned().collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DetectorModel {
    Knn(KnnModel),
    Copod(EcdfModel),
    Ecod(EcdfModel),
    Osvm(OsvmModel),
    IForest(IForestModel),
    Usad(UsadModel),
}

#[derive(Serialize, Deserialize)]
struct ModelEnvelope {
    format: String,
    version: u32,
    width: usize,
    model: DetectorModel,
}

impl DetectorModel {
    pub fn fit(normal: &WindowSet, params: &Hyperparams) -> Result<Self> {
        if normal.len() < 2 {
            return Err(Error::InsufficientData { needed: 2, got: normal.len() });
        }
        if let Some(i) = normal.windows.iter().position(|w| w.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite { index: i });
        }
        if let Some(w) = normal.windows.iter().find(|w| w.len() != normal.width) {
            return Err(Error::DimensionMismatch { expected: normal.width, got: w.len() });
        }
        let train = &normal.windows;
        Ok(match params {
            Hyperparams::Knn { n_neighbors, method } => Self::Knn(KnnModel::fit(train, *n_neighbors, *method)?),
            Hyperparams::Copod => Self::Copod(EcdfModel::fit(train, TailVariant::Copod)?),
            Hyperparams::Ecod => Self::Ecod(EcdfModel::fit(train, TailVariant::Ecod)?),
            Hyperparams::Osvm { nu, gamma, max_train } => {
                Self::Osvm(OsvmModel::fit(&capped(train, *max_train), *nu, *gamma, 1_000_000)?)
            }
            Hyperparams::IForest { n_estimators, max_features, max_samples, seed } => {
                Self::IForest(IForestModel::fit(train, *n_estimators, *max_features, *max_samples, *seed)?)
            }
            Hyperparams::Usad { params, max_train } => {
                Self::Usad(UsadModel::fit(&capped(train, *max_train), params.clone())?)
            }
        })
    }

    pub fn kind(&self) -> DetectorKind {
        match self {
            Self::Knn(_) => DetectorKind::Knn,
            Self::Copod(_) => DetectorKind::Copod,
            Self::Ecod(_) => DetectorKind::Ecod,
            Self::Osvm(_) => DetectorKind::Osvm,
            Self::IForest(_) => DetectorKind::IForest,
            Self::Usad(_) => DetectorKind::Usad,
        }
    }

    pub fn width(&self) -> usize {
        match self {
            Self::Knn(m) => m.train.first().map_or(0, |r| r.len()),
            Self::Copod(m) | Self::Ecod(m) => m.dims(),
            Self::Osvm(m) => m.support.first().map_or(0, |r| r.len()),
            Self::IForest(m) => m.dims,
            Self::Usad(m) => m.encoder.in_dim(),
        }
    }

    /// Raw anomaly scores, higher meaning more anomalous.
    pub fn score(&self, windows: &WindowSet) -> Result<Vec<f64>> {
        let width = self.width();
        if let Some(w) = windows.windows.iter().find(|w| w.len() != width) {
            return Err(Error::DimensionMismatch { expected: width, got: w.len() });
        }
        let q = &windows.windows;
        let scores = match self {
            Self::Knn(m) => m.score(q),
            Self::Copod(m) | Self::Ecod(m) => m.score(q),
            Self::Osvm(m) => m.score(q),
            Self::IForest(m) => m.score(q),
            Self::Usad(m) => m.score(q),
        };
        if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
            return Err(Error::NonFinite { index: i });
        }
        Ok(scores)
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        let env = ModelEnvelope {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            width: self.width(),
            model: self.clone(),
        };
        serde_json::to_writer(out, &env)?;
        Ok(())
    }

    pub fn read_json<R: Read>(input: R) -> Result<Self> {
        let env: ModelEnvelope = serde_json::from_reader(input)?;
        if env.format != MODEL_FORMAT || env.version != MODEL_VERSION {
            return Err(Error::Format(format!(
                "expected {MODEL_FORMAT} v{MODEL_VERSION}, found {} v{}",
                env.format, env.version
            )));
        }
        Ok(env.model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_json(std::io::BufWriter::new(File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_json(std::io::BufReader::new(File::open(path)?))
    }
}

/// How many windows a detector flags.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Contamination {
    /// Flag `⌈fraction·N⌉` windows.
    Fraction(f64),
    /// Flag exactly this many windows.
    Count(usize),
}

impl Contamination {
    pub fn flagged(&self, n: usize) -> Result<usize> {
        let k = match *self {
            Self::Fraction(c) => {
                if !(c > 0.0 && c < 1.0) {
                    return Err(Error::InvalidInput(format!("contamination {c} outside (0, 1)")));
                }
                // Guard against 0.05·20 = 1.0000000000000002 rounding up to 2.
                (c * n as f64 - 1e-9).ceil().max(0.0) as usize
            }
            Self::Count(k) => k,
        };
        if k == 0 || k >= n {
            return Err(Error::InsufficientData { needed: k + 1, got: n });
        }
        Ok(k)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorOutput {
    pub kind: DetectorKind,
    pub raw: Vec<f64>,
    /// Min-max scaled over this set, in `[0, 1]`.
    pub scaled: Vec<f64>,
    /// Largest scaled score among the windows left unflagged.
    pub threshold: f64,
    pub labels: Vec<u8>,
}

pub fn minmax_scale(raw: &[f64]) -> Result<Vec<f64>> {
    let min = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > min) {
        return Err(Error::Degenerate("constant anomaly scores".into()));
    }
    Ok(raw.iter().map(|&s| (s - min) / (max - min)).collect())
}

/// Flags the top `⌈c·N⌉` windows by score; equal scores favour the earlier window.
///
/// The threshold is the highest scaled score left unflagged, so without ties at
/// the cut `label = 1 ⟺ scaled > threshold`.
pub fn threshold_and_label(kind: DetectorKind, raw: &[f64], contamination: Contamination) -> Result<DetectorOutput> {
    let n = raw.len();
    let k = contamination.flagged(n)?;
    let scaled = minmax_scale(raw)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scaled[b].total_cmp(&scaled[a]).then(a.cmp(&b)));
    let mut labels = vec![0u8; n];
    for &i in &order[..k] {
        labels[i] = 1;
    }
    let threshold = scaled[order[k]];
    Ok(DetectorOutput { kind, raw: raw.to_vec(), scaled, threshold, labels })
}

impl DetectorOutput {
    pub fn flagged(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }

    /// CSV `window_index,raw,scaled,label`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["window_index", "raw", "scaled", "label"])?;
        for i in 0..self.raw.len() {
            w.write_record([
                i.to_string(),
                format_value(self.raw[i]),
                format_value(self.scaled[i]),
                self.labels[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the CSV written by [`write_csv`](Self::write_csv); the threshold is
    /// recovered as the largest unflagged scaled score.
    pub fn read_csv<R: Read>(kind: DetectorKind, input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let mut out = DetectorOutput { kind, raw: vec![], scaled: vec![], threshold: 0.0, labels: vec![] };
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = i + 2;
            let num = |c: usize| -> Result<f64> {
                rec.get(c)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::Parse { row, message: format!("bad field {c}") })
            };
            if num(0)? as usize != i {
                return Err(Error::Parse { row, message: "window_index out of sequence".into() });
            }
            out.raw.push(num(1)?);
            out.scaled.push(num(2)?);
            out.labels.push(num(3)? as u8);
        }
        out.threshold = out
            .scaled
            .iter()
            .zip(&out.labels)
            .filter(|(_, &l)| l == 0)
            .map(|(&s, _)| s)
            .fold(f64::NEG_INFINITY, f64::max);
        if !out.threshold.is_finite() {
            return Err(Error::Degenerate("score file has no unflagged window".into()));
        }
        Ok(out)
    }
}

/// CSV `window_index,origin_index,score` of unthresholded scores.
pub fn write_raw_scores<W: Write>(windows: &WindowSet, raw: &[f64], out: W) -> Result<()> {
    if windows.len() != raw.len() {
        return Err(Error::DimensionMismatch { expected: windows.len(), got: raw.len() });
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["window_index", "origin_index", "score"])?;
    for (i, (o, s)) in windows.origin.iter().zip(raw).enumerate() {
        w.write_record([i.to_string(), o.to_string(), format_value(*s)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_raw_scores<R: Read>(input: R) -> Result<Vec<f64>> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let v = rec
            .get(2)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::Parse { row: i + 2, message: "bad score".into() })?;
        out.push(v);
    }
    Ok(out)
}

/// Search space per tunable detector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperGrid {
    pub knn_n_neighbors: Vec<usize>,
    pub knn_method: Vec<KnnMethod>,
    pub osvm_nu: Vec<f64>,
    pub iforest_n_estimators: Vec<usize>,
    pub iforest_max_features: Vec<f64>,
    pub usad_alpha: Vec<f64>,
}

impl Default for HyperGrid {
    fn default() -> Self {
        let tenths: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
        Self {
            knn_n_neighbors: vec![1, 5, 10, 15, 20, 25, 50, 60, 70, 80, 90, 100],
            knn_method: KnnMethod::ALL.to_vec(),
            osvm_nu: tenths.clone(),
            iforest_n_estimators: vec![10, 20, 30, 40, 50, 75, 100, 150, 200],
            iforest_max_features: tenths,
            usad_alpha: vec![0.5],
        }
    }
}

impl HyperGrid {
    /// Candidates in grid order, built on top of `base` for the untuned fields.
    pub fn configs(&self, base: &Hyperparams) -> Result<Vec<Hyperparams>> {
        let out: Vec<Hyperparams> = match base {
            Hyperparams::Knn { .. } => self
                .knn_n_neighbors
                .iter()
                .flat_map(|&k| self.knn_method.iter().map(move |&m| Hyperparams::Knn { n_neighbors: k, method: m }))
                .collect(),
            Hyperparams::Osvm { gamma, max_train, .. } => self
                .osvm_nu
                .iter()
                .map(|&nu| Hyperparams::Osvm { nu, gamma: *gamma, max_train: *max_train })
                .collect(),
            Hyperparams::IForest { max_samples, seed, .. } => self
                .iforest_n_estimators
                .iter()
                .flat_map(|&n| {
                    self.iforest_max_features.iter().map(move |&f| Hyperparams::IForest {
                        n_estimators: n,
                        max_features: f,
                        max_samples: *max_samples,
                        seed: *seed,
                    })
                })
                .collect(),
            Hyperparams::Usad { params, max_train } => self
                .usad_alpha
                .iter()
                .map(|&a| Hyperparams::Usad {
                    params: UsadParams { alpha: a, beta: 1.0 - a, ..params.clone() },
                    max_train: *max_train,
                })
                .collect(),
            Hyperparams::Copod | Hyperparams::Ecod => {
                return Err(Error::InvalidInput(format!("{} has no hyperparameters to tune", base.kind())))
            }
        };
        if out.is_empty() {
            return Err(Error::InvalidInput(format!("empty grid for {}", base.kind())));
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub best: Hyperparams,
    pub best_f1: f64,
    pub trials: Vec<(Hyperparams, f64)>,
}

/// Grid (or budgeted random) search ranked by F1 against `labels`.
///
/// Uses the anomalous set's ground truth, which leaks test labels into model
/// selection; callers gate this behind an explicit switch.
pub fn tune(
    base: &Hyperparams,
    normal: &WindowSet,
    anomalous: &WindowSet,
    labels: &[u8],
    grid: &HyperGrid,
    contamination: Contamination,
    budget: Option<usize>,
    seed: u64,
) -> Result<TuneResult> {
    let mut configs = grid.configs(base)?;
    if let Some(b) = budget {
        if b == 0 {
            return Err(Error::InvalidInput("tuning budget must be positive".into()));
        }
        if b < configs.len() {
            let mut keep = index::sample(&mut util::rng(seed), configs.len(), b).into_vec();
            keep.sort_unstable();
            configs = keep.into_iter().map(|i| configs[i].clone()).collect();
        }
    }
    let f1_of = |raw: &[f64]| -> Result<f64> {
        match threshold_and_label(base.kind(), raw, contamination) {
            Ok(out) => Ok(Metrics::compute(&out.labels, labels)?.f1),
            Err(Error::Degenerate(_)) => Ok(0.0),
            Err(e) => Err(e),
        }
    };

    let mut trials = Vec::with_capacity(configs.len());
    if matches!(base, Hyperparams::Knn { .. }) {
        let kmax = configs
            .iter()
            .map(|c| if let Hyperparams::Knn { n_neighbors, .. } = c { *n_neighbors } else { 0 })
            .max()
            .unwrap_or(1)
            .min(normal.len());
        let table = knn::neighbour_table(&normal.windows, &anomalous.windows, kmax);
        for c in configs {
            let Hyperparams::Knn { n_neighbors, method } = c else { unreachable!() };
            if n_neighbors > normal.len() {
                continue;
            }
            let raw: Vec<f64> = table.iter().map(|d| method.aggregate(d, n_neighbors)).collect();
            trials.push((c, f1_of(&raw)?));
        }
    } else {
        for c in configs {
            let model = DetectorModel::fit(normal, &c)?;
            let raw = model.score(anomalous)?;
            trials.push((c, f1_of(&raw)?));
        }
    }
    let (best, best_f1) = trials
        .iter()
        .fold(None::<&(Hyperparams, f64)>, |acc, t| match acc {
            Some(a) if a.1 >= t.1 => Some(a),
            _ => Some(t),
        })
        .cloned()
        .ok_or_else(|| Error::InvalidInput("no feasible configuration in grid".into()))?;
    Ok(TuneResult { best, best_f1, trials })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn windows(rows: Vec<Vec<f64>>, labels: Vec<u8>) -> WindowSet {
        let n = rows.len();
        WindowSet { width: rows[0].len(), windows: rows, labels, origin: (0..n).collect() }
    }

    #[test]
    fn raw_scores_round_trip() {
        let ws = windows(vec![vec![0.0; 6]; 3], vec![0, 1, 0]);
        let mut buf = Vec::new();
        write_raw_scores(&ws, &[0.5, 2.25, -1.0], &mut buf).unwrap();
        assert_eq!(read_raw_scores(buf.as_slice()).unwrap(), vec![0.5, 2.25, -1.0]);
        assert!(write_raw_scores(&ws, &[1.0], Vec::new()).is_err());
    }

    #[test]
    fn top_five_of_hundred() {
        let raw: Vec<f64> = (1..=100).map(f64::from).collect();
        let out = threshold_and_label(DetectorKind::Knn, &raw, Contamination::Fraction(0.05)).unwrap();
        assert_eq!(out.flagged(), 5);
        assert!(out.labels[95..].iter().all(|&l| l == 1));
        assert_eq!(out.scaled[0], 0.0);
        assert_eq!(out.scaled[99], 1.0);
        assert!((out.threshold - 94.0 / 99.0).abs() < 1e-12);
        for i in 0..100 {
            assert_eq!(out.labels[i] == 1, out.scaled[i] > out.threshold);
        }
    }

    #[test]
    fn ties_at_cut_prefer_earlier_window() {
        // 20 scores, 0.05 → one flag; indices 3 and 7 share the top score.
        let mut raw = vec![0.0; 20];
        raw[1] = 0.5;
        raw[3] = 1.0;
        raw[7] = 1.0;
        let out = threshold_and_label(DetectorKind::Ecod, &raw, Contamination::Fraction(0.05)).unwrap();
        assert_eq!(out.flagged(), 1);
        assert_eq!(out.labels[3], 1);
        assert_eq!(out.labels[7], 0);
    }

    #[test]
    fn constant_scores_are_degenerate() {
        let r = threshold_and_label(DetectorKind::Knn, &[1.0; 40], Contamination::Fraction(0.05));
        assert!(matches!(r, Err(Error::Degenerate(_))));
    }

    #[test]
    fn too_few_scores_for_contamination() {
        let r = threshold_and_label(DetectorKind::Knn, &[1.0, 2.0], Contamination::Fraction(0.05)).unwrap();
        assert_eq!(r.flagged(), 1);
        let r = threshold_and_label(DetectorKind::Knn, &[1.0], Contamination::Fraction(0.5));
        assert!(matches!(r, Err(Error::InsufficientData { .. })));
    }

    #[test]
    fn real_scale_count() {
        let raw: Vec<f64> = (0..20_419).map(|i| ((i * 7919) % 20_419) as f64).collect();
        let out = threshold_and_label(DetectorKind::Knn, &raw, Contamination::Fraction(0.05)).unwrap();
        assert_eq!(out.flagged(), 1021);
    }

    #[test]
    fn grid_sizes() {
        let g = HyperGrid::default();
        assert_eq!(g.configs(&Hyperparams::default_for(DetectorKind::Knn)).unwrap().len(), 36);
        assert_eq!(g.configs(&Hyperparams::default_for(DetectorKind::Osvm)).unwrap().len(), 9);
        assert_eq!(g.configs(&Hyperparams::default_for(DetectorKind::IForest)).unwrap().len(), 81);
        assert!(g.configs(&Hyperparams::Ecod).is_err());
        assert!(g.configs(&Hyperparams::Copod).is_err());
        let empty = HyperGrid { osvm_nu: vec![], ..Default::default() };
        assert!(empty.configs(&Hyperparams::default_for(DetectorKind::Osvm)).is_err());
    }

    #[test]
    fn tune_single_entry_and_ties() {
        let normal = windows((0..30).map(|i| vec![(i % 5) as f64, 0.0]).collect(), vec![0; 30]);
        let mut rows: Vec<Vec<f64>> = (0..20).map(|i| vec![(i % 5) as f64, 0.0]).collect();
        rows[4] = vec![50.0, 50.0];
        let mut labels = vec![0u8; 20];
        labels[4] = 1;
        let anomalous = windows(rows, labels.clone());
        let single = HyperGrid { knn_n_neighbors: vec![3], knn_method: vec![KnnMethod::Mean], ..Default::default() };
        let base = Hyperparams::default_for(DetectorKind::Knn);
        let r = tune(&base, &normal, &anomalous, &labels, &single, Contamination::Count(1), None, 0).unwrap();
        assert_eq!(r.best, Hyperparams::Knn { n_neighbors: 3, method: KnnMethod::Mean });

        // Every configuration isolates the outlier: the first in grid order wins.
        let g = HyperGrid { knn_n_neighbors: vec![1, 2, 3], ..Default::default() };
        let r = tune(&base, &normal, &anomalous, &labels, &g, Contamination::Count(1), None, 0).unwrap();
        assert_eq!(r.best_f1, 1.0);
        assert_eq!(r.best, Hyperparams::Knn { n_neighbors: 1, method: KnnMethod::Largest });
        assert!(tune(&Hyperparams::Ecod, &normal, &anomalous, &labels, &g, Contamination::Count(1), None, 0).is_err());
    }

    #[test]
    fn model_json_round_trip_and_version_check() {
        let normal = windows((0..20).map(|i| vec![i as f64, (i * i) as f64]).collect(), vec![0; 20]);
        let m = DetectorModel::fit(&normal, &Hyperparams::Ecod).unwrap();
        let mut buf = Vec::new();
        m.write_json(&mut buf).unwrap();
        assert_eq!(DetectorModel::read_json(buf.as_slice()).unwrap(), m);
        let text = String::from_utf8(buf).unwrap().replace("\"version\":1", "\"version\":99");
        assert!(matches!(DetectorModel::read_json(text.as_bytes()), Err(Error::Format(_))));
    }

    #[test]
    fn score_rejects_wrong_width() {
        let normal = windows((0..20).map(|i| vec![i as f64, 1.0]).collect(), vec![0; 20]);
        let m = DetectorModel::fit(&normal, &Hyperparams::Ecod).unwrap();
        let q = windows(vec![vec![1.0, 2.0, 3.0]], vec![0]);
        assert!(matches!(m.score(&q), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn score_csv_round_trip_recovers_threshold() {
        let raw: Vec<f64> = (0..40).map(|i| (i as f64).sin()).collect();
        let out = threshold_and_label(DetectorKind::Osvm, &raw, Contamination::Fraction(0.05)).unwrap();
        let mut buf = Vec::new();
        out.write_csv(&mut buf).unwrap();
        let back = DetectorOutput::read_csv(DetectorKind::Osvm, buf.as_slice()).unwrap();
        assert_eq!(back, out);
    }

    proptest! {
        #[test]
        fn flagged_count_is_ceiling(raw in prop::collection::vec(0.0f64..1.0, 20..400), c in 0.01f64..0.3) {
            prop_assume!(raw.iter().any(|&x| x != raw[0]));
            let out = threshold_and_label(DetectorKind::Knn, &raw, Contamination::Fraction(c)).unwrap();
            prop_assert_eq!(out.flagged(), (c * raw.len() as f64 - 1e-9).ceil() as usize);
            prop_assert!(out.scaled.iter().all(|&s| (0.0..=1.0).contains(&s)));
        }
    }
}
