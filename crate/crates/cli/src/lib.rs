//! Configuration and experiment orchestration for the `irbl` binary.

pub mod config;
pub mod suite;

pub use config::{load_config, parse_config, ConfigError, ExperimentConfig, FovPreset, SuiteAxes};
pub use suite::{run_all, run_suite, single_runs, suite_runs, RunKey, RunOutcome, SuiteError, SUMMARY_HEADER};
