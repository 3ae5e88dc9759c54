//! Configuration, Monte Carlo execution and reporting for the boxed-bandit
//! algorithms.

pub mod config;
pub mod experiment;
pub mod report;

pub use config::{load_config, parse_config, Algorithm, ConfigError, ExperimentConfig};
pub use experiment::{run_experiment, AggregateRow, ExperimentError, ExperimentOutput, TrialRow};
