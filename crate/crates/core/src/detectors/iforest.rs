//! Isolation forest with a per-tree feature subset.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Average path length of an unsuccessful BST search over `n` points.
pub fn c_factor(n: usize) -> f64 {
    match n {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => {
            let n = n as f64;
            2.0 * ((n - 1.0).ln() + EULER_GAMMA) - 2.0 * (n - 1.0) / n
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf { size: usize },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsolationTree {
    pub nodes: Vec<Node>,
}

impl IsolationTree {
    fn grow(
        data: &[Vec<f64>],
        idx: &mut [usize],
        features: &[usize],
        depth: usize,
        limit: usize,
        nodes: &mut Vec<Node>,
        rng: &mut impl Rng,
    ) -> usize {
        let id = nodes.len();
        nodes.push(Node::Leaf { size: idx.len() });
        if idx.len() <= 1 || depth >= limit {
            return id;
        }
        // Try features in random order until one is not constant on this node.
        let mut order = features.to_vec();
        for i in (1..order.len()).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        for f in order {
            let (lo, hi) = idx
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &i| (a.min(data[i][f]), b.max(data[i][f])));
            if hi <= lo {
                continue;
            }
            let threshold = rng.gen_range(lo..hi);
            let mut split = 0;
            for j in 0..idx.len() {
                if data[idx[j]][f] < threshold {
                    idx.swap(j, split);
                    split += 1;
                }
            }
            let (l_idx, r_idx) = idx.split_at_mut(split);
            let left = Self::grow(data, l_idx, features, depth + 1, limit, nodes, rng);
            let right = Self::grow(data, r_idx, features, depth + 1, limit, nodes, rng);
            nodes[id] = Node::Split { feature: f, threshold, left, right };
            return id;
        }
        id
    }

    pub fn path_length(&self, x: &[f64]) -> f64 {
        let mut node = 0;
        let mut depth = 0.0;
        loop {
            match self.nodes[node] {
                Node::Leaf { size } => return depth + c_factor(size),
                Node::Split { feature, threshold, left, right } => {
                    node = if x[feature] < threshold { left } else { right };
                    depth += 1.0;
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IForestModel {
    pub trees: Vec<IsolationTree>,
    pub sample_size: usize,
    pub dims: usize,
}

impl IForestModel {
    pub fn fit(
        train: &[Vec<f64>],
        n_estimators: usize,
        max_features: f64,
        max_samples: usize,
        seed: u64,
    ) -> Result<Self> {
        if n_estimators == 0 {
            return Err(Error::InvalidInput("n_estimators must be positive".into()));
        }
        if !(max_features > 0.0 && max_features <= 1.0) {
            return Err(Error::InvalidInput(format!("max_features {max_features} outside (0, 1]")));
        }
        let dims = train.first().map(|r| r.len()).ok_or(Error::InsufficientData { needed: 2, got: 0 })?;
        let psi = max_samples.min(train.len()).max(1);
        let n_feat = ((max_features * dims as f64) as usize).clamp(1, dims);
        let limit = (psi as f64).log2().ceil().max(0.0) as usize;
        let trees = (0..n_estimators)
            .map(|t| {
                let mut rng = util::rng(util::derive_seed(seed, t as u64));
                let mut idx = index::sample(&mut rng, train.len(), psi).into_vec();
                let mut features = index::sample(&mut rng, dims, n_feat).into_vec();
                features.sort_unstable();
                let mut nodes = Vec::new();
                IsolationTree::grow(train, &mut idx, &features, 0, limit, &mut nodes, &mut rng);
                IsolationTree { nodes }
            })
            .collect();
        Ok(Self { trees, sample_size: psi, dims })
    }

    pub fn mean_path_length(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.path_length(x)).sum::<f64>() / self.trees.len() as f64
    }

    /// `2^(-E[h(x)] / c(psi))`, in `(0, 1]`.
    pub fn score_one(&self, x: &[f64]) -> f64 {
        let c = c_factor(self.sample_size).max(f64::MIN_POSITIVE);
        2f64.powf(-self.mean_path_length(x) / c)
    }

    pub fn score(&self, queries: &[Vec<f64>]) -> Vec<f64> {
        queries.iter().map(|q| self.score_one(q)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn c_factor_values() {
        assert_eq!(c_factor(1), 0.0);
        assert_eq!(c_factor(2), 1.0);
        // 2·H(255) − 2·255/256 with H(i) ≈ ln(i) + γ.
        assert!((c_factor(256) - 10.244_770_920_119_07).abs() < 1e-9);
    }

    #[test]
    fn far_query_isolates_faster() {
        let train: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let m = IForestModel::fit(&train, 100, 1.0, 256, 42).unwrap();
        let near = m.score_one(&[5.0]);
        let far = m.score_one(&[100.0]);
        assert!(far > near, "{far} vs {near}");
        // A point beyond every split threshold follows the rightmost branch,
        // which on this sample averages fewer splits than an interior point.
        assert!(m.mean_path_length(&[100.0]) < m.mean_path_length(&[5.0]));
    }

    #[test]
    fn path_length_by_hand_on_two_points() {
        // Two points: one split, each side a leaf of size one → path 1.
        let train = vec![vec![0.0], vec![1.0]];
        let m = IForestModel::fit(&train, 5, 1.0, 256, 1).unwrap();
        assert!((m.mean_path_length(&[0.0]) - 1.0).abs() < 1e-12);
        assert!((m.mean_path_length(&[7.0]) - 1.0).abs() < 1e-12);
        assert!((m.score_one(&[7.0]) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn outlier_far_outside_hull_scores_highest() {
        for trial in 0..100u64 {
            let mut rng = util::rng(1000 + trial);
            let train: Vec<Vec<f64>> = (0..200).map(|_| (0..6).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
            let m = IForestModel::fit(&train, 50, 1.0, 256, trial).unwrap();
            let mut batch: Vec<Vec<f64>> = (0..30).map(|_| (0..6).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
            let pos = rng.gen_range(0..batch.len());
            batch.insert(pos, vec![11.0; 6]);
            let s = m.score(&batch);
            let best = s.iter().copied().fold(f64::MIN, f64::max);
            assert_eq!(s[pos], best, "trial {trial}");
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let train: Vec<Vec<f64>> = (0..50).map(|i| vec![(i * 7 % 13) as f64, i as f64]).collect();
        let a = IForestModel::fit(&train, 20, 0.5, 32, 9).unwrap();
        let b = IForestModel::fit(&train, 20, 0.5, 32, 9).unwrap();
        assert_eq!(a, b);
    }
}
