//! Detector selection as a Markov decision process solved with DQN.

mod dqn;
mod env;
mod epsilon;
mod reward;

pub use dqn::{DqnConfig, DqnPolicy, EvalStep, LogRow, TrainOutcome};
pub use env::{SelectionEnv, StepResult};
pub use epsilon::EpsilonSchedule;
pub use reward::{Outcome, RewardKind, RewardMode, RewardSpec};
