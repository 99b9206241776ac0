//! Experiment harness for `heatlab-core`: configuration, initial data,
//! threshold bisection, suites, and on-disk artifacts.

pub mod config;
pub mod experiment;
pub mod heat_rate;
pub mod initial;
pub mod io;
pub mod threshold;

pub use config::{ConfigError, ExperimentKind, RunConfig};
pub use experiment::{run_config, run_experiment, Overrides, RunError};
pub use initial::{Family, InitialDataSpec};
pub use threshold::{Bisection, ThresholdError, ThresholdResult};
