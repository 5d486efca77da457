//! Experiment driver: config loading, dataset generation and caching,
//! training of every objective, evaluation and report writing.

pub mod config;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod pipeline;
pub mod report;

pub use config::{load_config, Experiment, ExperimentConfig, Objective, Overrides};
pub use error::CliError;
pub use pipeline::{gradcheck as run_gradcheck, run_experiment, RunSummary, Stage};
