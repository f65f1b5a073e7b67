//! Time Series Forest correctness classifiers.
//!
//! One forest per detector predicts whether that detector's label on a window
//! is correct (class 1) or wrong (class 0). Feature rows are
//! `[w0..w5, scaled_score, threshold, predicted_label, dist_conf, consensus_conf]`
//! read as an ordered pseudo-series; each tree draws `⌊√m⌋` random intervals
//! and splits on their mean, standard deviation and slope by information gain.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::detectors::DetectorKind;
use crate::error::{Error, Result};
use crate::signals::SignalTable;
use crate::util;

const MODEL_FORMAT: &str = "rlad-tsf";
const MODEL_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct TsfDataset {
    pub kind: DetectorKind,
    pub features: Vec<Vec<f64>>,
    pub target: Vec<u8>,
}

pub fn build_dataset(table: &SignalTable, detector: usize) -> Result<TsfDataset> {
    let kind = *DetectorKind::ALL
        .get(detector)
        .ok_or_else(|| Error::InvalidInput(format!("detector index {detector} out of range")))?;
    let det = table.detector(kind);
    let features = (0..table.len())
        .map(|i| {
            let mut row = table.values[i].clone();
            row.extend([det.scaled[i], det.threshold, det.labels[i] as f64, det.dist_conf[i], det.consensus_conf[i]]);
            row
        })
        .collect();
    let target = det.labels.iter().zip(&table.ground_truth).map(|(p, t)| (p == t) as u8).collect();
    Ok(TsfDataset { kind, features, target })
}

impl TsfDataset {
    pub fn len(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }

    pub fn subset(&self, idx: &[usize]) -> TsfDataset {
        TsfDataset {
            kind: self.kind,
            features: idx.iter().map(|&i| self.features[i].clone()).collect(),
            target: idx.iter().map(|&i| self.target[i]).collect(),
        }
    }
}

/// Recovers the detector's labels from correctness targets and ground truth.
pub fn labels_from_target(target: &[u8], truth: &[u8]) -> Vec<u8> {
    target.iter().zip(truth).map(|(&c, &t)| if c == 1 { t } else { 1 - t }).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    /// False when a class was missing and the split fell back to unstratified.
    pub stratified: bool,
}

/// Random split with `round(fraction·n)` training rows, stratified by `strata`.
pub fn stratified_split(strata: &[u8], fraction: f64, seed: u64) -> Result<Split> {
    let n = strata.len();
    if n < 10 {
        return Err(Error::InsufficientData { needed: 10, got: n });
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidInput(format!("split fraction {fraction} outside (0, 1)")));
    }
    let total = (fraction * n as f64).round() as usize;
    let mut rng = util::rng(seed);
    let classes: Vec<Vec<usize>> = (0..2u8).map(|c| (0..n).filter(|&i| strata[i] == c).collect()).collect();
    let stratified = classes.iter().all(|c| !c.is_empty());
    let mut train = Vec::with_capacity(total);
    if stratified {
        // Largest-remainder allocation keeps the total exact.
        let quotas: Vec<f64> = classes.iter().map(|c| fraction * c.len() as f64).collect();
        let mut take: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
        let mut by_remainder: Vec<usize> = (0..2).collect();
        by_remainder.sort_by(|&a, &b| (quotas[b] - quotas[b].floor()).total_cmp(&(quotas[a] - quotas[a].floor())));
        let mut short = total - take.iter().sum::<usize>();
        for &c in by_remainder.iter().cycle().take(4) {
            if short == 0 {
                break;
            }
            if take[c] < classes[c].len() {
                take[c] += 1;
                short -= 1;
            }
        }
        for (c, members) in classes.iter().enumerate() {
            let mut m = members.clone();
            m.shuffle(&mut rng);
            train.extend_from_slice(&m[..take[c]]);
        }
    } else {
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(&mut rng);
        train.extend_from_slice(&all[..total]);
    }
    train.sort_unstable();
    let mut in_train = vec![false; n];
    train.iter().for_each(|&i| in_train[i] = true);
    let test = (0..n).filter(|&i| !in_train[i]).collect();
    Ok(Split { train, test, stratified })
}

/// 20/80 split of one dataset, stratified by its correctness target.
pub fn split_20_80(ds: &TsfDataset, seed: u64) -> Result<Split> {
    stratified_split(&ds.target, 0.2, seed)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stat {
    Mean,
    Stdev,
    Slope,
}

impl Stat {
    pub const ALL: [Stat; 3] = [Stat::Mean, Stat::Stdev, Stat::Slope];

    pub fn compute(self, xs: &[f64]) -> f64 {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        match self {
            Stat::Mean => mean,
            Stat::Stdev => (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt(),
            Stat::Slope => {
                if xs.len() < 2 {
                    return 0.0;
                }
                let tbar = (n - 1.0) / 2.0;
                let (mut num, mut den) = (0.0, 0.0);
                for (t, x) in xs.iter().enumerate() {
                    let dt = t as f64 - tbar;
                    num += dt * (x - mean);
                    den += dt * dt;
                }
                num / den
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf { class: u8 },
    Split { start: usize, end: usize, stat: Stat, threshold: f64, left: usize, right: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalTree {
    pub nodes: Vec<TreeNode>,
}

impl IntervalTree {
    pub fn predict(&self, row: &[f64]) -> u8 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { class } => return *class,
                TreeNode::Split { start, end, stat, threshold, left, right } => {
                    i = if stat.compute(&row[*start..*end]) <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TsfParams {
    pub n_trees: usize,
    pub min_interval: usize,
    pub max_depth: Option<usize>,
    pub seed: u64,
}

impl Default for TsfParams {
    fn default() -> Self {
        Self { n_trees: 100, min_interval: 1, max_depth: None, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TsfModel {
    pub kind: DetectorKind,
    pub params: TsfParams,
    pub series_len: usize,
    pub trees: Vec<IntervalTree>,
}

fn entropy(pos: usize, n: usize) -> f64 {
    if n == 0 || pos == 0 || pos == n {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    -(p * p.log2() + (1.0 - p) * (1.0 - p).log2())
}

fn majority(target: &[u8], idx: &[usize]) -> u8 {
    let ones = idx.iter().filter(|&&i| target[i] == 1).count();
    (2 * ones >= idx.len()) as u8
}

struct Grower<'a> {
    /// `feats[f][row]`, `f` indexing `(interval, stat)` pairs.
    feats: Vec<Vec<f64>>,
    specs: Vec<(usize, usize, Stat)>,
    target: &'a [u8],
    max_depth: Option<usize>,
    nodes: Vec<TreeNode>,
}

impl Grower<'_> {
    fn grow(&mut self, idx: &mut [usize], depth: usize) -> usize {
        let id = self.nodes.len();
        let class = majority(self.target, idx);
        self.nodes.push(TreeNode::Leaf { class });
        let n = idx.len();
        let pos = idx.iter().filter(|&&i| self.target[i] == 1).count();
        if n < 2 || pos == 0 || pos == n || self.max_depth.is_some_and(|d| depth >= d) {
            return id;
        }
        let parent = entropy(pos, n);
        let mut best: Option<(f64, f64, usize)> = None;
        let mut pairs: Vec<(f64, u8)> = Vec::with_capacity(n);
        for (f, col) in self.feats.iter().enumerate() {
            pairs.clear();
            pairs.extend(idx.iter().map(|&i| (col[i], self.target[i])));
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left_pos = 0;
            for k in 0..n - 1 {
                left_pos += pairs[k].1 as usize;
                if pairs[k].0 == pairs[k + 1].0 {
                    continue;
                }
                let nl = k + 1;
                let gain = parent
                    - (nl as f64 * entropy(left_pos, nl) + (n - nl) as f64 * entropy(pos - left_pos, n - nl)) / n as f64;
                let mut threshold = 0.5 * (pairs[k].0 + pairs[k + 1].0);
                if threshold >= pairs[k + 1].0 {
                    // Adjacent floats: the midpoint rounds up onto the right value.
                    threshold = pairs[k].0;
                }
                let better = match best {
                    None => true,
                    Some((g, t, _)) => gain > g + 1e-12 || ((gain - g).abs() <= 1e-12 && threshold < t),
                };
                if better {
                    best = Some((gain, threshold, f));
                }
            }
        }
        let Some((gain, threshold, f)) = best else { return id };
        if gain <= 1e-12 {
            return id;
        }
        let col = &self.feats[f];
        let mut split = 0;
        for j in 0..n {
            if col[idx[j]] <= threshold {
                idx.swap(j, split);
                split += 1;
            }
        }
        if split == 0 || split == n {
            return id;
        }
        let (l, r) = idx.split_at_mut(split);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        let (start, end, stat) = self.specs[f];
        self.nodes[id] = TreeNode::Split { start, end, stat, threshold, left, right };
        id
    }
}

/// `⌊√m⌋` random intervals `[start, end)` of length at least `min_interval`.
fn draw_intervals(m: usize, min_interval: usize, rng: &mut impl Rng) -> Vec<(usize, usize)> {
    let count = ((m as f64).sqrt().floor() as usize).max(1);
    let min_len = min_interval.clamp(1, m);
    (0..count)
        .map(|_| {
            let start = rng.gen_range(0..=m - min_len);
            let len = rng.gen_range(min_len..=m - start);
            (start, start + len)
        })
        .collect()
}

impl TsfModel {
    pub fn fit(train: &TsfDataset, params: &TsfParams) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        if params.n_trees == 0 {
            return Err(Error::InvalidInput("n_trees must be positive".into()));
        }
        let m = train.features[0].len();
        if let Some(r) = train.features.iter().find(|r| r.len() != m) {
            return Err(Error::DimensionMismatch { expected: m, got: r.len() });
        }
        let trees = (0..params.n_trees)
            .map(|t| {
                let mut rng = util::rng(util::derive_seed(params.seed, t as u64));
                let intervals = draw_intervals(m, params.min_interval, &mut rng);
                let specs: Vec<(usize, usize, Stat)> =
                    intervals.iter().flat_map(|&(s, e)| Stat::ALL.map(|st| (s, e, st))).collect();
                let feats = specs
                    .iter()
                    .map(|&(s, e, st)| train.features.iter().map(|r| st.compute(&r[s..e])).collect())
                    .collect();
                let mut g = Grower { feats, specs, target: &train.target, max_depth: params.max_depth, nodes: Vec::new() };
                let mut idx: Vec<usize> = (0..train.len()).collect();
                g.grow(&mut idx, 0);
                IntervalTree { nodes: g.nodes }
            })
            .collect();
        Ok(Self { kind: train.kind, params: params.clone(), series_len: m, trees })
    }

    /// Majority vote; a tied vote predicts class 1.
    pub fn predict_one(&self, row: &[f64]) -> u8 {
        let ones = self.trees.iter().filter(|t| t.predict(row) == 1).count();
        (2 * ones >= self.trees.len()) as u8
    }

    pub fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<u8>> {
        if let Some(r) = rows.iter().find(|r| r.len() != self.series_len) {
            return Err(Error::DimensionMismatch { expected: self.series_len, got: r.len() });
        }
        Ok(rows.iter().map(|r| self.predict_one(r)).collect())
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer(out, &serde_json::json!({
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "model": self,
        }))?;
        Ok(())
    }

    pub fn read_json<R: Read>(input: R) -> Result<Self> {
        let mut v: serde_json::Value = serde_json::from_reader(input)?;
        if v["format"] != MODEL_FORMAT || v["version"] != MODEL_VERSION {
            return Err(Error::Format(format!("expected {MODEL_FORMAT} v{MODEL_VERSION}")));
        }
        Ok(serde_json::from_value(v["model"].take())?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_json(std::io::BufWriter::new(File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_json(std::io::BufReader::new(File::open(path)?))
    }
}
