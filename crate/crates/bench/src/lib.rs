//! Shared fixtures for the benchmarks.

use rlad_core::config::ExperimentConfig;
use rlad_core::pipeline::{self, Prepared, TsfStage};
use rlad_core::{signals, SignalTable};

/// A year of hourly history and a six-week test partition with mixed anomalies.
pub fn config() -> ExperimentConfig {
    ExperimentConfig::from_ini_str(
        "[data]\nnormal_len = 8760\ntest_len = 1008\n[detectors]\nusad_epochs = 2\n[tsf]\nn_trees = 20\n",
    )
    .expect("bench config")
}

pub fn prepared(cfg: &ExperimentConfig) -> Prepared {
    pipeline::prepare(cfg).expect("prepare")
}

/// Signal table and forest predictions for the selector benchmarks.
pub fn selection_inputs(cfg: &ExperimentConfig, prep: &Prepared) -> (SignalTable, TsfStage) {
    let det = pipeline::run_detectors(cfg, prep).expect("detectors");
    let table = signals::assemble(&prep.test_windows, &det.outputs).expect("signals");
    let tsf = pipeline::run_tsf(cfg, &table).expect("tsf");
    (table, tsf)
}
