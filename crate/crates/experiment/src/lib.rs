//! Active learning experiments with a simulated oracle.
//!
//! An experiment holds out a stratified test split, then for every strategy
//! and seed runs the loop from a stratified seed set, revealing ground-truth
//! labels on query and measuring the model on the test split after every
//! retrain. Results land in `learning_curve.csv`, `selections.jsonl` and
//! `summary.json`.

pub mod config;
pub mod error;
pub mod runner;
pub mod split;
pub mod synth;

pub use config::ExperimentConfig;
pub use error::{ExperimentError, Result};
pub use runner::{run_experiment, run_one, MetricRecord, Prepared, RunResult, Summary};
