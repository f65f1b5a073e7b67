//! One-class SVM with an RBF kernel, solved in the dual by SMO.
//!
//! Dual: minimise `½ αᵀKα` subject to `0 ≤ αᵢ ≤ 1`, `Σαᵢ = ν·l`. The decision
//! function is `f(x) = Σ αᵢ K(xᵢ, x) − ρ`; the anomaly score is `−f(x)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::squared_distance;

const TOLERANCE: f64 = 1e-3;
const TAU: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OsvmModel {
    pub nu: f64,
    pub gamma: f64,
    pub support: Vec<Vec<f64>>,
    pub alpha: Vec<f64>,
    pub rho: f64,
}

/// `1 / (dims · var)` over all training values; 1.0 when the data is constant.
pub fn default_gamma(train: &[Vec<f64>]) -> f64 {
    let dims = train.first().map_or(1, |r| r.len());
    let all: Vec<f64> = train.iter().flatten().copied().collect();
    let var = crate::util::std_dev(&all).powi(2);
    if var > 0.0 {
        1.0 / (dims as f64 * var)
    } else {
        1.0
    }
}

fn kernel(gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    (-gamma * squared_distance(a, b)).exp()
}

impl OsvmModel {
    pub fn fit(train: &[Vec<f64>], nu: f64, gamma: Option<f64>, max_iter: usize) -> Result<Self> {
        if !(nu > 0.0 && nu <= 1.0) {
            return Err(Error::InvalidInput(format!("nu {nu} outside (0, 1]")));
        }
        let l = train.len();
        if l < 2 {
            return Err(Error::InsufficientData { needed: 2, got: l });
        }
        let gamma = gamma.unwrap_or_else(|| default_gamma(train));
        let q: Vec<f64> = (0..l)
            .flat_map(|i| (0..l).map(move |j| (i, j)))
            .map(|(i, j)| kernel(gamma, &train[i], &train[j]))
            .collect();
        let qrow = |i: usize| &q[i * l..(i + 1) * l];

        // Feasible start: the first ⌊νl⌋ multipliers at the bound, one fractional.
        let total = nu * l as f64;
        let mut alpha = vec![0.0; l];
        let full = (total.floor() as usize).min(l);
        alpha[..full].iter_mut().for_each(|a| *a = 1.0);
        if full < l {
            alpha[full] = total - full as f64;
        }
        let mut grad = vec![0.0; l];
        for (j, &a) in alpha.iter().enumerate() {
            if a != 0.0 {
                for (g, k) in grad.iter_mut().zip(qrow(j)) {
                    *g += a * k;
                }
            }
        }

        for _ in 0..max_iter {
            // Maximal violating pair: i raises its multiplier, j lowers.
            let mut i = usize::MAX;
            let mut gmax = f64::NEG_INFINITY;
            for t in 0..l {
                if alpha[t] < 1.0 && -grad[t] > gmax {
                    gmax = -grad[t];
                    i = t;
                }
            }
            let mut j = usize::MAX;
            let mut gmin = f64::INFINITY;
            for t in 0..l {
                if alpha[t] > 0.0 && -grad[t] < gmin {
                    gmin = -grad[t];
                    j = t;
                }
            }
            if i == usize::MAX || j == usize::MAX || gmax - gmin < TOLERANCE {
                break;
            }
            let eta = (q[i * l + i] + q[j * l + j] - 2.0 * q[i * l + j]).max(TAU);
            let mut step = (grad[j] - grad[i]) / eta;
            step = step.min(1.0 - alpha[i]).min(alpha[j]);
            if step <= 0.0 {
                break;
            }
            alpha[i] += step;
            alpha[j] -= step;
            let (ri, rj) = (qrow(i), qrow(j));
            for t in 0..l {
                grad[t] += step * (ri[t] - rj[t]);
            }
        }

        // ρ from free multipliers, else the midpoint of the feasible interval.
        let free: Vec<f64> = (0..l).filter(|&t| alpha[t] > 0.0 && alpha[t] < 1.0).map(|t| grad[t]).collect();
        let rho = if free.is_empty() {
            let ub = (0..l).filter(|&t| alpha[t] <= 0.0).map(|t| grad[t]).fold(f64::INFINITY, f64::min);
            let lb = (0..l).filter(|&t| alpha[t] >= 1.0).map(|t| grad[t]).fold(f64::NEG_INFINITY, f64::max);
            match (ub.is_finite(), lb.is_finite()) {
                (true, true) => 0.5 * (ub + lb),
                (true, false) => ub,
                (false, true) => lb,
                _ => 0.0,
            }
        } else {
            free.iter().sum::<f64>() / free.len() as f64
        };

        let (support, alpha): (Vec<Vec<f64>>, Vec<f64>) =
            (0..l).filter(|&t| alpha[t] > 0.0).map(|t| (train[t].clone(), alpha[t])).unzip();
        Ok(Self { nu, gamma, support, alpha, rho })
    }

    pub fn decision(&self, x: &[f64]) -> f64 {
        self.support
            .iter()
            .zip(&self.alpha)
            .map(|(s, a)| a * kernel(self.gamma, s, x))
            .sum::<f64>()
            - self.rho
    }

    pub fn score(&self, queries: &[Vec<f64>]) -> Vec<f64> {
        queries.iter().map(|q| -self.decision(q)).collect()
    }
}
