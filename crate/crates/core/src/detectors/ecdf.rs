//! Empirical-CDF tail detectors: ECOD and COPOD.
//!
//! Both keep the sorted training sample of every dimension. For a value `x`
//! in dimension `d` the smoothed tail probabilities are
//! `left = (#{t <= x} + 1) / (n + 1)` and `right = (#{t >= x} + 1) / (n + 1)`,
//! so `-ln` of either is finite and flat beyond the training extremes.
//!
//! * ECOD sums left, right and skewness-selected tails over dimensions and
//!   takes the largest of the three sums.
//! * COPOD treats the per-dimension ECDF values as empirical copula
//!   observations; per dimension it keeps the larger of the skewness-selected
//!   tail and the two-sided average, and sums the result.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TailVariant {
    Ecod,
    Copod,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EcdfModel {
    pub variant: TailVariant,
    /// Ascending training values per dimension.
    pub sorted: Vec<Vec<f64>>,
    pub skewness: Vec<f64>,
}

/// Biased sample skewness `m3 / m2^1.5`; zero for constant input.
pub fn skewness(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m3 = xs.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n;
    if m2 <= f64::EPSILON * mean.abs().max(1.0) {
        0.0
    } else {
        m3 / m2.powf(1.5)
    }
}

impl EcdfModel {
    pub fn fit(train: &[Vec<f64>], variant: TailVariant) -> Result<Self> {
        let dims = train.first().map(|r| r.len()).ok_or(Error::InsufficientData { needed: 1, got: 0 })?;
        let mut sorted = vec![Vec::with_capacity(train.len()); dims];
        for row in train {
            if row.len() != dims {
                return Err(Error::DimensionMismatch { expected: dims, got: row.len() });
            }
            for (d, &v) in row.iter().enumerate() {
                sorted[d].push(v);
            }
        }
        let skewness = sorted.iter().map(|col| skewness(col)).collect();
        for col in &mut sorted {
            col.sort_by(f64::total_cmp);
        }
        Ok(Self { variant, sorted, skewness })
    }

    pub fn dims(&self) -> usize {
        self.sorted.len()
    }

    pub fn samples(&self) -> usize {
        self.sorted.first().map_or(0, |c| c.len())
    }

    /// `(-ln left, -ln right)` for value `x` in dimension `d`.
    pub fn tails(&self, d: usize, x: f64) -> (f64, f64) {
        let col = &self.sorted[d];
        let n = col.len() as f64;
        let le = col.partition_point(|&t| t <= x) as f64;
        let ge = (col.len() - col.partition_point(|&t| t < x)) as f64;
        (-((le + 1.0) / (n + 1.0)).ln(), -((ge + 1.0) / (n + 1.0)).ln())
    }

    pub fn score_one(&self, x: &[f64]) -> f64 {
        match self.variant {
            TailVariant::Ecod => {
                let (mut l, mut r, mut s) = (0.0, 0.0, 0.0);
                for (d, &v) in x.iter().enumerate() {
                    let (ul, ur) = self.tails(d, v);
                    l += ul;
                    r += ur;
                    s += if self.skewness[d] < 0.0 { ul } else { ur };
                }
                l.max(r).max(s)
            }
            TailVariant::Copod => x
                .iter()
                .enumerate()
                .map(|(d, &v)| {
                    let (ul, ur) = self.tails(d, v);
                    let skew = self.skewness[d];
                    let selected = if skew < 0.0 {
                        ul
                    } else if skew > 0.0 {
                        ur
                    } else {
                        ul + ur
                    };
                    selected.max(0.5 * (ul + ur))
                })
                .sum(),
        }
    }

    pub fn score(&self, queries: &[Vec<f64>]) -> Vec<f64> {
        queries.iter().map(|q| self.score_one(q)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn five() -> Vec<Vec<f64>> {
        (1..=5).map(|i| vec![i as f64; 6]).collect()
    }

    #[test]
    fn fit_shape() {
        let train: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64; 6]).collect();
        let m = EcdfModel::fit(&train, TailVariant::Ecod).unwrap();
        assert_eq!(m.dims(), 6);
        assert_eq!(m.samples(), 10);
    }

    #[test]
    fn tails_by_hand() {
        let m = EcdfModel::fit(&five(), TailVariant::Ecod).unwrap();
        // Median 3: three values <= 3 and three >= 3, out of n=5.
        let (l, r) = m.tails(0, 3.0);
        assert!((l - (6.0f64 / 4.0).ln()).abs() < 1e-12);
        assert!((r - (6.0f64 / 4.0).ln()).abs() < 1e-12);
        // Beyond the maximum: every value <= x, none >= x.
        let (l, r) = m.tails(0, 9.0);
        assert!(l.abs() < 1e-12);
        assert!((r - 6.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn median_query_scores_below_extreme_query() {
        for v in [TailVariant::Ecod, TailVariant::Copod] {
            let m = EcdfModel::fit(&five(), v).unwrap();
            let s_med = m.score_one(&[3.0; 6]);
            let s_far = m.score_one(&[9.0; 6]);
            // ECOD by hand: median gives 6·ln(1.5) per sum, far gives 6·ln(6).
            if v == TailVariant::Ecod {
                assert!((s_med - 6.0 * 1.5f64.ln()).abs() < 1e-12);
                assert!((s_far - 6.0 * 6.0f64.ln()).abs() < 1e-12);
            }
            assert!(s_med <= s_far);
        }
    }

    #[test]
    fn skewness_sign() {
        assert!(skewness(&[1.0, 1.0, 1.0, 10.0]) > 0.0);
        assert!(skewness(&[-10.0, 1.0, 1.0, 1.0]) < 0.0);
        assert_eq!(skewness(&[2.0; 4]), 0.0);
    }

    proptest! {
        #[test]
        fn pushing_beyond_max_never_decreases(
            train in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 6), 5..40),
            base in prop::collection::vec(0.0f64..1.0, 6),
            d in 0usize..6,
            a in 0.0f64..5.0,
            b in 0.0f64..5.0,
            copod in any::<bool>(),
        ) {
            let v = if copod { TailVariant::Copod } else { TailVariant::Ecod };
            let m = EcdfModel::fit(&train, v).unwrap();
            let max = m.sorted[d].last().copied().unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let mut x1 = base.clone();
            x1[d] = max + lo;
            let mut x2 = base.clone();
            x2[d] = max + hi;
            prop_assert!(m.score_one(&x2) >= m.score_one(&x1));
            let mut all_far = base.clone();
            all_far.iter_mut().enumerate().for_each(|(j, x)| *x = m.sorted[j].last().unwrap() + 1.0);
            let mut median = base;
            median.iter_mut().enumerate().for_each(|(j, x)| *x = m.sorted[j][m.sorted[j].len() / 2]);
            prop_assert!(m.score_one(&all_far) >= m.score_one(&median));
        }
    }
}
