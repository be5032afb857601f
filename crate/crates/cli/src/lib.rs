//! Experiment harness for the flatopt optimizers: config parsing, seeded
//! runs, sweeps, stability probes, bound evaluation and gradient checks.

pub mod commands;
pub mod config;
pub mod error;
pub mod metrics;
pub mod train;

pub use config::ExperimentConfig;
pub use error::{CliError, Result};
