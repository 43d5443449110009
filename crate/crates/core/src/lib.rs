//! Smooth plug-in inverse estimators for the joint distribution of an event
//! time and a continuous mark under current status censoring.
//!
//! Modules:
//! * [`kernels`]: kernel densities, rescaling, moments, condition checks;
//! * [`scenarios`]: analytic truth models and exact censored sampling;
//! * [`estimators`]: `F̂⁽¹⁾`, `F̂⁽²⁾`, the sub-density estimates and `f̂⁽²⁾`;
//! * [`simulation`]: seeded replication engine and Monte Carlo MSE;
//! * [`asymptotics`]: limiting constants, normality and equivalence
//!   diagnostics, the mean functional and its information bound;
//! * [`bandwidth`]: smoothed-bootstrap local bandwidth selection.

pub mod asymptotics;
pub mod bandwidth;
pub mod error;
pub mod estimators;
pub mod kernels;
pub mod quad;
pub mod scenarios;
pub mod simulation;

pub use error::{Error, Result};
pub use estimators::{EstimatorConfig, EstimatorKind};
pub use kernels::{Bandwidths, BivariateKernel, UnivariateKernel};
pub use scenarios::{Observation, Sample, Scenario};
