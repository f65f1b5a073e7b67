//! Confusion counts, precision/recall/F1, and per-run evaluation records.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn from_labels(predicted: &[u8], truth: &[u8]) -> Result<Self> {
        if predicted.len() != truth.len() {
            return Err(Error::DimensionMismatch { expected: truth.len(), got: predicted.len() });
        }
        if predicted.is_empty() {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        let mut m = Self::default();
        for (&p, &t) in predicted.iter().zip(truth) {
            match (p == 1, t == 1) {
                (true, true) => m.tp += 1,
                (true, false) => m.fp += 1,
                (false, false) => m.tn += 1,
                (false, true) => m.fn_ += 1,
            }
        }
        Ok(m)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub confusion: ConfusionMatrix,
}

impl Metrics {
    /// Zero-denominator conventions: precision, recall and F1 are 0 when undefined.
    pub fn from_confusion(c: ConfusionMatrix) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(c.tp, c.tp + c.fp);
        let recall = ratio(c.tp, c.tp + c.fn_);
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        Self { precision, recall, f1, confusion: c }
    }

    pub fn compute(predicted: &[u8], truth: &[u8]) -> Result<Self> {
        Ok(Self::from_confusion(ConfusionMatrix::from_labels(predicted, truth)?))
    }
}

/// One evaluated system (a detector or the selector) with run provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub system: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub confusion: ConfusionMatrix,
    pub config_hash: String,
    pub seed: u64,
    pub dataset_fingerprint: String,
}

impl EvalReport {
    pub fn new(system: impl Into<String>, m: Metrics, config_hash: &str, seed: u64, fingerprint: &str) -> Self {
        Self {
            system: system.into(),
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            confusion: m.confusion,
            config_hash: config_hash.into(),
            seed,
            dataset_fingerprint: fingerprint.into(),
        }
    }
}
