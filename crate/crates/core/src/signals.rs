//! Confidence scores and the per-window signal table shared by the
//! correctness forests and the selector state.
//!
//! Column layout (frozen): `w0..w{W-1}`, then for each detector in
//! alphabetical order (COPOD, ECOD, IFOREST, KNN, OSVM, USAD) the features
//! `consensus_conf, dist_conf, predicted_label, scaled_score, threshold`,
//! then `ground_truth`. With `W = 6` that is 36 features plus the truth column.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::detectors::{DetectorKind, DetectorOutput};
use crate::error::{Error, Result};
use crate::series::{format_value, WindowSet};
use crate::POOL_SIZE;

pub const FEATURES_PER_DETECTOR: usize = 5;
const FEATURE_NAMES: [&str; FEATURES_PER_DETECTOR] =
    ["consensus_conf", "dist_conf", "predicted_label", "scaled_score", "threshold"];

/// Margin of a score over its threshold relative to the score range.
///
/// Scaling scores to `[0, 1]` first makes the denominator 1; because min-max
/// scaling is affine, the value is the same whether computed on raw or scaled
/// scores.
pub fn dist_to_threshold(score: f64, threshold: f64, score_min: f64, score_max: f64) -> Result<f64> {
    if score_max < score_min {
        return Err(Error::InvalidInput("score_max below score_min".into()));
    }
    if score_max == score_min {
        return Err(Error::Degenerate("zero score range".into()));
    }
    Ok((score - threshold) / (score_max - score_min))
}

/// Fraction of the pool sharing `labels[this]`, counting the detector itself.
pub fn consensus(labels: &[u8; POOL_SIZE], this: usize) -> f64 {
    let mine = labels[this];
    labels.iter().filter(|&&l| l == mine).count() as f64 / POOL_SIZE as f64
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetectorSignals {
    pub kind: DetectorKind,
    pub scaled: Vec<f64>,
    pub threshold: f64,
    pub labels: Vec<u8>,
    pub dist_conf: Vec<f64>,
    pub consensus_conf: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SignalTable {
    pub width: usize,
    pub values: Vec<Vec<f64>>,
    /// Indexed by pool order (`DetectorKind::index`).
    pub detectors: Vec<DetectorSignals>,
    pub ground_truth: Vec<u8>,
}

fn alphabetical() -> [DetectorKind; POOL_SIZE] {
    let mut kinds = DetectorKind::ALL;
    kinds.sort_by_key(|k| k.name());
    kinds
}

pub fn assemble(windows: &WindowSet, outputs: &[DetectorOutput]) -> Result<SignalTable> {
    if outputs.len() != POOL_SIZE {
        return Err(Error::InvalidInput(format!("expected {POOL_SIZE} detector outputs, got {}", outputs.len())));
    }
    let n = windows.len();
    let mut by_kind: Vec<Option<&DetectorOutput>> = vec![None; POOL_SIZE];
    for o in outputs {
        if o.labels.len() != n || o.scaled.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: o.labels.len() });
        }
        if by_kind[o.kind.index()].replace(o).is_some() {
            return Err(Error::InvalidInput(format!("duplicate output for {}", o.kind)));
        }
    }
    let outputs: Vec<&DetectorOutput> = by_kind.into_iter().map(|o| o.unwrap()).collect();
    let mut detectors: Vec<DetectorSignals> = outputs
        .iter()
        .map(|o| -> Result<DetectorSignals> {
            let min = o.scaled.iter().copied().fold(f64::INFINITY, f64::min);
            let max = o.scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            Ok(DetectorSignals {
                kind: o.kind,
                scaled: o.scaled.clone(),
                threshold: o.threshold,
                labels: o.labels.clone(),
                dist_conf: o
                    .scaled
                    .iter()
                    .map(|&s| dist_to_threshold(s, o.threshold, min, max))
                    .collect::<Result<_>>()?,
                consensus_conf: Vec::with_capacity(n),
            })
        })
        .collect::<Result<_>>()?;
    for i in 0..n {
        let mut labels = [0u8; POOL_SIZE];
        for (d, det) in detectors.iter().enumerate() {
            labels[d] = det.labels[i];
        }
        for (d, det) in detectors.iter_mut().enumerate() {
            det.consensus_conf.push(consensus(&labels, d));
        }
    }
    Ok(SignalTable { width: windows.width, values: windows.windows.clone(), detectors, ground_truth: windows.labels.clone() })
}

impl SignalTable {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.width + POOL_SIZE * FEATURES_PER_DETECTOR
    }

    pub fn detector(&self, kind: DetectorKind) -> &DetectorSignals {
        &self.detectors[kind.index()]
    }

    /// Feature column names in frozen order, without `ground_truth`.
    pub fn feature_names(&self) -> Vec<String> {
        let mut names: Vec<String> = (0..self.width).map(|i| format!("w{i}")).collect();
        for kind in alphabetical() {
            for f in FEATURE_NAMES {
                names.push(format!("{}_{f}", kind.slug()));
            }
        }
        names
    }

    fn feature_value(det: &DetectorSignals, f: usize, i: usize) -> f64 {
        match f {
            0 => det.consensus_conf[i],
            1 => det.dist_conf[i],
            2 => det.labels[i] as f64,
            3 => det.scaled[i],
            _ => det.threshold,
        }
    }

    /// Feature row `i` in frozen column order; this is the selector state.
    pub fn row(&self, i: usize) -> Vec<f64> {
        let mut row = Vec::with_capacity(self.n_features());
        row.extend_from_slice(&self.values[i]);
        for kind in alphabetical() {
            let det = self.detector(kind);
            for f in 0..FEATURES_PER_DETECTOR {
                row.push(Self::feature_value(det, f, i));
            }
        }
        row
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        self.write_csv_with(out, &[])
    }

    /// Writes the table plus extra integer columns (e.g. forest predictions).
    pub fn write_csv_with<W: Write>(&self, out: W, extra: &[(String, Vec<u8>)]) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = self.feature_names();
        header.push("ground_truth".into());
        header.extend(extra.iter().map(|(n, _)| n.clone()));
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec: Vec<String> = self.row(i).into_iter().map(format_value).collect();
            rec.push(self.ground_truth[i].to_string());
            rec.extend(extra.iter().map(|(_, c)| c[i].to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::io::BufReader::new(File::open(path)?))
    }

    /// Reads a table written by [`write_csv`](Self::write_csv); extra trailing
    /// columns are ignored. The header must name every column in order.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let headers = rdr.headers()?.clone();
        let width = headers.iter().take_while(|h| h.starts_with('w') && h[1..].parse::<usize>().is_ok()).count();
        let mut table = SignalTable {
            width,
            values: Vec::new(),
            detectors: DetectorKind::ALL
                .iter()
                .map(|&kind| DetectorSignals {
                    kind,
                    scaled: vec![],
                    threshold: 0.0,
                    labels: vec![],
                    dist_conf: vec![],
                    consensus_conf: vec![],
                })
                .collect(),
            ground_truth: Vec::new(),
        };
        let mut expected = table.feature_names();
        expected.push("ground_truth".into());
        if headers.len() < expected.len() || headers.iter().zip(&expected).any(|(h, e)| h != e) {
            return Err(Error::Parse { row: 1, message: format!("signal table header must start with {}", expected.join(",")) });
        }
        let order = alphabetical();
        for (r, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = r + 2;
            let num = |c: usize| -> Result<f64> {
                rec[c].trim().parse().map_err(|_| Error::Parse { row, message: format!("bad number in column {c}") })
            };
            table.values.push((0..width).map(num).collect::<Result<_>>()?);
            for (j, kind) in order.iter().enumerate() {
                let base = width + j * FEATURES_PER_DETECTOR;
                let det = &mut table.detectors[kind.index()];
                det.consensus_conf.push(num(base)?);
                det.dist_conf.push(num(base + 1)?);
                det.labels.push(num(base + 2)? as u8);
                det.scaled.push(num(base + 3)?);
                det.threshold = num(base + 4)?;
            }
            table.ground_truth.push(num(expected.len() - 1)? as u8);
        }
        Ok(table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detectors::{threshold_and_label, Contamination};
    use proptest::prelude::*;

    #[test]
    fn distance_examples() {
        assert_eq!(dist_to_threshold(0.95, 0.95, 0.0, 1.0).unwrap(), 0.0);
        assert!((dist_to_threshold(0.80, 0.95, 0.0, 1.0).unwrap() + 0.15).abs() < 1e-12);
        assert_eq!(dist_to_threshold(1.0, 0.0, 0.0, 1.0).unwrap(), 1.0);
        assert!(matches!(dist_to_threshold(0.5, 0.5, 1.0, 1.0), Err(Error::Degenerate(_))));
    }

    #[test]
    fn raw_and_scaled_margins_coincide() {
        let raw = [3.0, 7.0, 11.0, 5.0];
        let (min, max) = (3.0, 11.0);
        let thr_raw = 7.0;
        let scale = |x: f64| (x - min) / (max - min);
        for &s in &raw {
            let a = dist_to_threshold(s, thr_raw, min, max).unwrap();
            let b = dist_to_threshold(scale(s), scale(thr_raw), 0.0, 1.0).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn consensus_examples() {
        assert_eq!(consensus(&[1; 6], 2), 1.0);
        assert!((consensus(&[1, 1, 1, 1, 0, 0], 0) - 4.0 / 6.0).abs() < 1e-12);
        assert!((consensus(&[1, 0, 0, 0, 0, 0], 0) - 1.0 / 6.0).abs() < 1e-12);
    }

    fn toy(n: usize, seed: u64) -> (WindowSet, Vec<DetectorOutput>) {
        use rand::Rng;
        let mut rng = crate::util::rng(seed);
        let windows = WindowSet {
            width: 6,
            windows: (0..n).map(|_| (0..6).map(|_| rng.gen_range(0.0..1.0)).collect()).collect(),
            labels: (0..n).map(|_| rng.gen_range(0..2)).collect(),
            origin: (0..n).collect(),
        };
        let outputs = DetectorKind::ALL
            .iter()
            .map(|&k| {
                let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
                threshold_and_label(k, &raw, Contamination::Fraction(0.2)).unwrap()
            })
            .collect();
        (windows, outputs)
    }

    #[test]
    fn assemble_shape_and_constant_thresholds() {
        let (w, o) = toy(5, 1);
        let t = assemble(&w, &o).unwrap();
        assert_eq!(t.len(), 5);
        assert_eq!(t.n_features(), 36);
        assert_eq!(t.row(0).len(), 36);
        let names = t.feature_names();
        assert_eq!(names.len(), 36);
        assert_eq!(names[6], "copod_consensus_conf");
        assert_eq!(names[35], "usad_threshold");
        let thr_col = names.iter().position(|n| n == "knn_threshold").unwrap();
        let first = t.row(0)[thr_col];
        assert!((0..5).all(|i| t.row(i)[thr_col] == first));
    }

    #[test]
    fn assemble_rejects_misaligned() {
        let (w, mut o) = toy(10, 2);
        o[3].labels.pop();
        assert!(matches!(assemble(&w, &o), Err(Error::DimensionMismatch { .. })));
        let (w, o) = toy(10, 2);
        assert!(assemble(&w, &o[..5]).is_err());
    }

    #[test]
    fn csv_round_trip_with_header() {
        let (w, o) = toy(12, 3);
        let t = assemble(&w, &o).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().next().unwrap().split(',').count(), 37);
        assert_eq!(SignalTable::read_csv(buf.as_slice()).unwrap(), t);
        let bad = text.replacen("w0", "x0", 1);
        assert!(SignalTable::read_csv(bad.as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn consensus_columns_consistent(seed in 0u64..500) {
            let (w, o) = toy(30, seed);
            let t = assemble(&w, &o).unwrap();
            for i in 0..t.len() {
                let k = t.detectors.iter().filter(|d| d.labels[i] == 1).count();
                for d in &t.detectors {
                    let expect = if d.labels[i] == 1 { k } else { 6 - k } as f64 / 6.0;
                    prop_assert!((d.consensus_conf[i] - expect).abs() < 1e-12);
                    prop_assert!((-1.0..=1.0).contains(&d.dist_conf[i]));
                    prop_assert_eq!(d.dist_conf[i] > 0.0, d.labels[i] == 1);
                }
            }
        }
    }
}
