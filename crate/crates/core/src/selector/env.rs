use crate::error::{Error, Result};
use crate::signals::SignalTable;
use crate::POOL_SIZE;

use super::reward::{Outcome, RewardMode, RewardSpec};

/// Episode over the window sequence; the action picks one detector per window.
#[derive(Clone, Debug)]
pub struct SelectionEnv {
    states: Vec<Vec<f64>>,
    labels: Vec<[u8; POOL_SIZE]>,
    truth: Vec<u8>,
    tsf: Vec<[u8; POOL_SIZE]>,
    gt_mask: Vec<u8>,
    reward: RewardSpec,
    cursor: usize,
    done: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepResult {
    pub reward: f64,
    /// Index of the next state, `None` at the end of the episode.
    pub next: Option<usize>,
    pub done: bool,
}

impl SelectionEnv {
    /// `tsf_predictions[d][t]` is forest `d`'s correctness prediction at window `t`.
    pub fn new(table: &SignalTable, tsf_predictions: &[Vec<u8>], gt_mask: &[u8], reward: RewardSpec) -> Result<Self> {
        let n = table.len();
        if n == 0 {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        if tsf_predictions.len() != POOL_SIZE {
            return Err(Error::DimensionMismatch { expected: POOL_SIZE, got: tsf_predictions.len() });
        }
        for p in tsf_predictions.iter().map(Vec::len).chain([gt_mask.len()]) {
            if p != n {
                return Err(Error::DimensionMismatch { expected: n, got: p });
            }
        }
        let labels = (0..n)
            .map(|t| std::array::from_fn(|d| table.detectors[d].labels[t]))
            .collect();
        let tsf = (0..n).map(|t| std::array::from_fn(|d| tsf_predictions[d][t])).collect();
        Ok(Self {
            states: (0..n).map(|t| table.row(t)).collect(),
            labels,
            truth: table.ground_truth.clone(),
            tsf,
            gt_mask: gt_mask.to_vec(),
            reward,
            cursor: 0,
            done: false,
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, t: usize) -> &[f64] {
        &self.states[t]
    }

    pub fn state_dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn reward_spec(&self) -> &RewardSpec {
        &self.reward
    }

    pub fn label(&self, t: usize, action: usize) -> u8 {
        self.labels[t][action]
    }

    pub fn truth(&self) -> &[u8] {
        &self.truth
    }

    pub fn reset(&mut self) -> usize {
        self.cursor = 0;
        self.done = false;
        0
    }

    /// The truth the reward is computed against for `action` at window `t`.
    pub fn reward_truth(&self, t: usize, action: usize) -> u8 {
        let p = self.labels[t][action];
        let surrogate = if self.tsf[t][action] == 1 { p } else { 1 - p };
        match self.reward.mode {
            RewardMode::GtruthOnly => self.truth[t],
            RewardMode::ClassOnly => surrogate,
            RewardMode::Mixed if self.gt_mask[t] == 1 => self.truth[t],
            RewardMode::Mixed => surrogate,
        }
    }

    pub fn step(&mut self, action: usize) -> Result<StepResult> {
        if action >= POOL_SIZE {
            return Err(Error::InvalidInput(format!("action {action} outside 0..{POOL_SIZE}")));
        }
        if self.done {
            return Err(Error::InvalidInput("step called on a finished episode".into()));
        }
        let t = self.cursor;
        let outcome = Outcome::from_labels(self.labels[t][action], self.reward_truth(t, action));
        let reward = self.reward.value(outcome, t);
        self.cursor += 1;
        self.done = self.cursor == self.states.len();
        Ok(StepResult { reward, next: (!self.done).then_some(self.cursor), done: self.done })
    }
}
