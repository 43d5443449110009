//! Configuration-driven experiment runner for the `csmark` estimators.

pub mod config;
pub mod run;

pub use config::{Config, ConfigError};
pub use run::{execute, run, Experiment, HarnessError, Outputs};
