//! Synthetic anomaly injection with exact ground truth.
//!
//! * global: pushed outside the clean series' `[min, max]` by `u·range`, `u ~ U(0.1, 0.5)`.
//! * local: placed `k·σ` away from the average of the two neighbours, `k ~ U(3, 5)`,
//!   where `σ` is the standard deviation of hourly differences over a centered
//!   24-hour neighbourhood. The result stays inside the clean global range.
//! * clustered: contiguous runs sharing one sign and one `k`, each point shifted
//!   by `k·σ` of its own neighbourhood and clamped to the global range.
//! * mixed: the budget split into thirds (global, local, clustered).

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::TimeSeries;
use crate::util;

/// Half-width of the local-statistics neighbourhood (hours).
const HALF_DAY: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InjectionKind {
    Global,
    Local,
    Clustered,
    Mixed,
}

impl std::fmt::Display for InjectionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Global => "global",
            Self::Local => "local",
            Self::Clustered => "clustered",
            Self::Mixed => "mixed",
        })
    }
}

impl std::str::FromStr for InjectionKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" => Ok(Self::Global),
            "local" => Ok(Self::Local),
            "clustered" => Ok(Self::Clustered),
            "mixed" => Ok(Self::Mixed),
            _ => Err(Error::Config(format!("unknown injection kind `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InjectionPlan {
    pub kind: InjectionKind,
    pub rate: f64,
    pub seed: u64,
    pub global_u: (f64, f64),
    pub local_k: (f64, f64),
    pub cluster_len_range: (usize, usize),
    /// Points excluded at each end so neighbourhoods are well-defined.
    pub edge_margin: usize,
}

impl InjectionPlan {
    pub fn new(kind: InjectionKind, rate: f64, seed: u64) -> Self {
        Self {
            kind,
            rate,
            seed,
            global_u: (0.1, 0.5),
            local_k: (3.0, 5.0),
            cluster_len_range: (4, 6),
            edge_margin: 24,
        }
    }

    pub fn budget(&self, n: usize) -> usize {
        (self.rate * n as f64).round() as usize
    }

    fn validate(&self, n: usize) -> Result<()> {
        if !(self.rate > 0.0 && self.rate < 1.0) {
            return Err(Error::Plan(format!("rate {} outside (0, 1)", self.rate)));
        }
        if self.rate * (n as f64) < 1.0 || self.budget(n) == 0 {
            return Err(Error::Plan(format!("rate {} on {n} points yields fewer than one anomaly", self.rate)));
        }
        let (u0, u1) = self.global_u;
        let (k0, k1) = self.local_k;
        if !(u0 > 0.0 && u1 >= u0) || !(k0 > 0.0 && k1 >= k0) {
            return Err(Error::Plan("magnitude ranges must be positive and ordered".into()));
        }
        let (c0, c1) = self.cluster_len_range;
        if c0 == 0 || c1 < c0 {
            return Err(Error::Plan(format!("invalid cluster length range [{c0}, {c1}]")));
        }
        Ok(())
    }
}

/// Run lengths within `[lo, hi]` summing to `budget`, or `None` if infeasible.
pub fn cluster_lengths(budget: usize, lo: usize, hi: usize, rng: &mut impl Rng) -> Option<Vec<usize>> {
    if budget == 0 || lo == 0 || hi < lo {
        return None;
    }
    let min_runs = budget.div_ceil(hi);
    let max_runs = budget / lo;
    if min_runs > max_runs {
        return None;
    }
    let runs = rng.gen_range(min_runs..=max_runs);
    let mut lens = vec![lo; runs];
    let mut rest = budget - runs * lo;
    while rest > 0 {
        let open: Vec<usize> = (0..runs).filter(|&i| lens[i] < hi).collect();
        let i = open[rng.gen_range(0..open.len())];
        lens[i] += 1;
        rest -= 1;
    }
    Some(lens)
}

struct Injector<'a> {
    clean: &'a [f64],
    values: Vec<f64>,
    labels: Vec<u8>,
    gmin: f64,
    gmax: f64,
    nonneg: bool,
    lo: usize,
    hi: usize,
    global_u: (f64, f64),
    rng: ChaCha8Rng,
}

impl Injector<'_> {
    fn range(&self) -> f64 {
        self.gmax - self.gmin
    }

    /// `[start, start+len)` plus one point either side is untouched.
    fn free(&self, start: usize, len: usize) -> bool {
        start >= self.lo
            && start + len <= self.hi
            && self.labels[start - 1..=(start + len).min(self.labels.len() - 1)]
                .iter()
                .all(|&l| l == 0)
    }

    fn candidates(&self, len: usize) -> Vec<usize> {
        let mut c: Vec<usize> = (self.lo..self.hi.saturating_sub(len - 1))
            .filter(|&s| self.free(s, len))
            .collect();
        c.sort_unstable();
        c
    }

    fn neighbour_reference(&self, i: usize) -> f64 {
        0.5 * (self.clean[i - 1] + self.clean[i + 1])
    }

    fn local_sigma(&self, i: usize) -> f64 {
        let a = i.saturating_sub(HALF_DAY);
        let b = (i + HALF_DAY).min(self.clean.len() - 1);
        let diffs: Vec<f64> = self.clean[a..=b].windows(2).map(|w| w[1] - w[0]).collect();
        util::std_dev(&diffs)
    }

    /// Standard deviation of the clean values over the centred 24-hour neighbourhood.
    fn day_sigma(&self, i: usize) -> f64 {
        let a = i.saturating_sub(HALF_DAY);
        let b = (i + HALF_DAY).min(self.clean.len() - 1);
        util::std_dev(&self.clean[a..=b])
    }

    fn global(&mut self, count: usize) -> Result<()> {
        for _ in 0..count {
            let mut cand = self.candidates(1);
            if cand.is_empty() {
                return Err(Error::Plan("no room left for global anomalies".into()));
            }
            cand.shuffle(&mut self.rng);
            let i = cand[0];
            let u = self.rng.gen_range(self.global_u.0..=self.global_u.1);
            let below = self.gmin - u * self.range();
            let above = self.gmax + u * self.range();
            let x = if self.rng.gen_bool(0.5) && !(self.nonneg && below < 0.0) { below } else { above };
            self.values[i] = x;
            self.labels[i] = 1;
        }
        Ok(())
    }

    fn local(&mut self, count: usize, k_range: (f64, f64)) -> Result<()> {
        let mut cand = self.candidates(1);
        cand.shuffle(&mut self.rng);
        let mut placed = 0;
        for i in cand {
            if placed == count {
                break;
            }
            if !self.free(i, 1) {
                continue;
            }
            let sigma = self.local_sigma(i);
            if sigma <= 0.0 {
                continue;
            }
            let reference = self.neighbour_reference(i);
            let k = self.rng.gen_range(k_range.0..=k_range.1);
            let sign = if self.rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let inside = |x: f64| x >= self.gmin && x <= self.gmax;
            let x = [sign, -sign].into_iter().map(|s| reference + s * k * sigma).find(|&x| inside(x));
            if let Some(x) = x {
                self.values[i] = x;
                self.labels[i] = 1;
                placed += 1;
            }
        }
        if placed < count {
            return Err(Error::Plan(format!("only {placed} of {count} local anomalies fit inside the global range")));
        }
        Ok(())
    }

    fn clustered(&mut self, budget: usize, len_range: (usize, usize), k_range: (f64, f64)) -> Result<()> {
        let lens = cluster_lengths(budget, len_range.0, len_range.1, &mut self.rng).ok_or_else(|| {
            Error::Plan(format!(
                "cannot split {budget} points into runs of length {}..={}",
                len_range.0, len_range.1
            ))
        })?;
        for len in lens {
            let cand = self.candidates(len);
            if cand.is_empty() {
                return Err(Error::Plan(format!("no room for a run of length {len}")));
            }
            let start = cand[self.rng.gen_range(0..cand.len())];
            let k = self.rng.gen_range(k_range.0..=k_range.1);
            let mut sign = if self.rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let run_mean = util::mean(&self.clean[start..start + len]);
            let shift: f64 = (start..start + len).map(|i| self.day_sigma(i)).sum::<f64>() * k / len as f64;
            if run_mean + sign * shift > self.gmax || run_mean + sign * shift < self.gmin {
                sign = -sign;
            }
            for i in start..start + len {
                let x = self.clean[i] + sign * k * self.day_sigma(i);
                self.values[i] = x.clamp(self.gmin, self.gmax);
                self.labels[i] = 1;
            }
        }
        Ok(())
    }
}

pub fn inject(ts: &TimeSeries, plan: &InjectionPlan) -> Result<TimeSeries> {
    let n = ts.len();
    plan.validate(n)?;
    if ts.anomaly_count() > 0 {
        return Err(Error::InvalidInput("series already contains anomalies".into()));
    }
    let budget = plan.budget(n);
    let lo = plan.edge_margin.max(HALF_DAY).max(1);
    let hi = n.saturating_sub(plan.edge_margin.max(HALF_DAY).max(1));
    if hi <= lo || hi - lo < budget {
        return Err(Error::Plan(format!("series of {n} points too short for {budget} anomalies")));
    }
    let gmin = ts.values.iter().copied().fold(f64::INFINITY, f64::min);
    let gmax = ts.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if gmax <= gmin {
        return Err(Error::Degenerate("constant series has no global range".into()));
    }
    let mut inj = Injector {
        clean: &ts.values,
        values: ts.values.clone(),
        labels: vec![0; n],
        gmin,
        gmax,
        nonneg: ts.values.iter().all(|&v| v >= 0.0),
        lo,
        hi,
        rng: util::rng(plan.seed),
        global_u: plan.global_u,
    };
    match plan.kind {
        InjectionKind::Global => inj.global(budget)?,
        InjectionKind::Local => inj.local(budget, plan.local_k)?,
        InjectionKind::Clustered => inj.clustered(budget, plan.cluster_len_range, plan.local_k)?,
        InjectionKind::Mixed => {
            let third = budget / 3;
            let mut clustered = budget - 2 * third;
            let mut local = third;
            // Shrink the clustered share to the nearest count that splits into whole runs.
            let (lo, hi) = plan.cluster_len_range;
            while clustered > 0 && clustered.div_ceil(hi.max(1)) > clustered / lo.max(1) {
                clustered -= 1;
                local += 1;
            }
            inj.global(third)?;
            if clustered > 0 {
                inj.clustered(clustered, plan.cluster_len_range, plan.local_k)?;
            }
            inj.local(local, plan.local_k)?;
        }
    }
    debug_assert_eq!(inj.labels.iter().filter(|&&l| l == 1).count(), budget);
    TimeSeries::new(ts.timestamps.clone(), inj.values, Some(inj.labels))
}
