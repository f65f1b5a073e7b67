//! Dynamic selection of unsupervised time-series anomaly detectors.
//!
//! Six detectors score sliding windows of hourly consumption data. Per-detector
//! correctness forests stand in for most ground-truth labels, and a DQN agent
//! learns which detector to trust at each window.
//!
//! Pipeline order: [`series`] → [`inject`] → [`detectors`] → [`signals`] →
//! [`tsf`] → [`selector`] → [`metrics`] / [`pipeline`].

pub mod config;
pub mod detectors;
pub mod error;
pub mod inject;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod report;
pub mod selector;
pub mod series;
pub mod signals;
pub mod synth;
pub mod tsf;
mod util;

pub use detectors::{DetectorKind, DetectorModel, DetectorOutput, HyperGrid, Hyperparams};
pub use error::{Error, Result};
pub use inject::{InjectionKind, InjectionPlan};
pub use metrics::{ConfusionMatrix, EvalReport, Metrics};
pub use selector::{DqnConfig, DqnPolicy, EpsilonSchedule, RewardKind, RewardMode, RewardSpec, SelectionEnv};
pub use series::{LabelRule, ScalerKind, ScalerSpec, TimeSeries, WindowSet};
pub use signals::SignalTable;
pub use tsf::{TsfDataset, TsfModel, TsfParams};

/// Number of detectors in the pool and actions available to the selector.
pub const POOL_SIZE: usize = 6;
