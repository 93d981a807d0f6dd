//! Command-line harness for walklab experiments: config parsing, deterministic
//! parallel runs, CSV and manifest output, reference reproduction.

pub mod config;
pub mod run;

pub use config::{parse_config, ConfigError, ExperimentConfig, ExperimentKind};
pub use run::{execute, run, verify_reference, RunError, RunOptions};
