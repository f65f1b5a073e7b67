//! k-nearest-neighbour outlier score over Euclidean window distances.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::squared_distance;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KnnMethod {
    /// Distance to the k-th neighbour.
    Largest,
    Mean,
    Median,
}

impl KnnMethod {
    pub const ALL: [KnnMethod; 3] = [KnnMethod::Largest, KnnMethod::Mean, KnnMethod::Median];

    /// Aggregates the `k` smallest of `sorted` (ascending) distances.
    pub fn aggregate(self, sorted: &[f64], k: usize) -> f64 {
        let d = &sorted[..k.min(sorted.len())];
        match self {
            Self::Largest => *d.last().unwrap(),
            Self::Mean => d.iter().sum::<f64>() / d.len() as f64,
            Self::Median => {
                let m = d.len() / 2;
                if d.len() % 2 == 1 {
                    d[m]
                } else {
                    0.5 * (d[m - 1] + d[m])
                }
            }
        }
    }
}

impl std::fmt::Display for KnnMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Largest => "largest",
            Self::Mean => "mean",
            Self::Median => "median",
        })
    }
}

impl std::str::FromStr for KnnMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "largest" => Ok(Self::Largest),
            "mean" => Ok(Self::Mean),
            "median" => Ok(Self::Median),
            _ => Err(Error::Config(format!("unknown knn method `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub method: KnnMethod,
    pub train: Vec<Vec<f64>>,
}

impl KnnModel {
    pub fn fit(train: &[Vec<f64>], k: usize, method: KnnMethod) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidInput("n_neighbors must be positive".into()));
        }
        if k > train.len() {
            return Err(Error::InsufficientData { needed: k, got: train.len() });
        }
        Ok(Self { k, method, train: train.to_vec() })
    }

    pub fn score(&self, queries: &[Vec<f64>]) -> Vec<f64> {
        neighbour_table(&self.train, queries, self.k)
            .iter()
            .map(|d| self.method.aggregate(d, self.k))
            .collect()
    }
}

/// Ascending distances from each query to its `k` nearest training rows.
pub fn neighbour_table(train: &[Vec<f64>], queries: &[Vec<f64>], k: usize) -> Vec<Vec<f64>> {
    let k = k.min(train.len());
    let mut buf = Vec::with_capacity(train.len());
    queries
        .iter()
        .map(|q| {
            buf.clear();
            buf.extend(train.iter().map(|t| squared_distance(q, t)));
            if k < buf.len() {
                buf.select_nth_unstable_by(k - 1, f64::total_cmp);
            }
            let mut top: Vec<f64> = buf[..k].to_vec();
            top.sort_by(f64::total_cmp);
            top.iter().map(|d| d.sqrt()).collect()
        })
        .collect()
}
