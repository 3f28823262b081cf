//! Experiment harness: configuration, seeded runs, statistics, CSV output and the CLI.

pub mod cli;
pub mod config;
pub mod experiment;
pub mod persist;
pub mod stats;

pub use config::{RunConfig, RunSettings};
pub use experiment::{
    compare_strategies, run_experiment, run_without_rehearsal, Comparison, RunRecord,
    StrategySummary,
};
pub use stats::{smoothed_min, t_test, tendency, TTestResult};
