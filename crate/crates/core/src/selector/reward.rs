use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Tp,
    Tn,
    Fp,
    Fn,
}

impl Outcome {
    pub fn from_labels(predicted: u8, truth: u8) -> Self {
        match (predicted, truth) {
            (1, 1) => Self::Tp,
            (1, _) => Self::Fp,
            (_, 1) => Self::Fn,
            _ => Self::Tn,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RewardKind {
    Original,
    R1,
    R2,
    AdapInc,
    AdapDec,
}

impl RewardKind {
    pub const ALL: [RewardKind; 5] = [Self::Original, Self::R1, Self::R2, Self::AdapInc, Self::AdapDec];

    /// Constants in `(tn, fn, tp, fp)` order.
    pub fn base(self) -> [f64; 4] {
        match self {
            Self::Original | Self::AdapDec => [0.5, -3.0, 1.0, -1.5],
            Self::R1 => [0.15, -3.0, 1.0, 0.1],
            Self::R2 => [1.0, 0.1, 0.15, -3.0],
            Self::AdapInc => [0.05, -0.03, 0.01, -0.015],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Original => "original",
            Self::R1 => "r1",
            Self::R2 => "r2",
            Self::AdapInc => "adapinc",
            Self::AdapDec => "adapdec",
        }
    }
}

impl fmt::Display for RewardKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RewardKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidInput(format!("unknown reward kind '{s}'")))
    }
}

/// Where the truth used for the reward comes from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RewardMode {
    /// Ground truth on the shared training subset, correctness forests elsewhere.
    #[default]
    Mixed,
    GtruthOnly,
    ClassOnly,
}

impl RewardMode {
    pub fn name(self) -> &'static str {
        match self {
            Self::Mixed => "mixed",
            Self::GtruthOnly => "gtruth_only",
            Self::ClassOnly => "class_only",
        }
    }
}

impl FromStr for RewardMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        [Self::Mixed, Self::GtruthOnly, Self::ClassOnly]
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidInput(format!("unknown reward mode '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardSpec {
    pub kind: RewardKind,
    pub mode: RewardMode,
    pub counter_period: usize,
    /// Exchange the FP and FN constants, the alternate reading of the error
    /// semantics, for sensitivity runs.
    #[serde(default)]
    pub swap_errors: bool,
}

impl Default for RewardSpec {
    fn default() -> Self {
        Self { kind: RewardKind::Original, mode: RewardMode::Mixed, counter_period: 100, swap_errors: false }
    }
}

impl RewardSpec {
    pub fn new(kind: RewardKind, mode: RewardMode) -> Self {
        Self { kind, mode, ..Self::default() }
    }

    /// Reward for `outcome` at `step` steps into the current episode.
    pub fn value(&self, outcome: Outcome, step: usize) -> f64 {
        let [tn, mut fn_, tp, mut fp] = self.kind.base();
        if self.swap_errors {
            std::mem::swap(&mut fn_, &mut fp);
        }
        let v = match outcome {
            Outcome::Tn => tn,
            Outcome::Fn => fn_,
            Outcome::Tp => tp,
            Outcome::Fp => fp,
        };
        let c = (1 + step / self.counter_period.max(1)) as f64;
        match self.kind {
            RewardKind::AdapInc => v * c * c,
            RewardKind::AdapDec => v / (c * c),
            _ => v,
        }
    }
}
