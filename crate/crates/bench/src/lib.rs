//! Experiment runner behind the `geoclust` command-line tool.

pub mod config;
pub mod report;
pub mod runner;

pub use config::{ConfigError, ExperimentConfig, MethodConfig};
pub use report::{read_csv, results_summary, write_csv, ResultsSummary};
pub use runner::{run_benchmark, run_sweep, trial_seed, Row};
