use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("bandwidth must be positive and finite, got {0}")]
    InvalidBandwidth(f64),

    #[error("kernel `{0}` has no derivative")]
    DerivativeUnavailable(String),

    /// The estimated censoring density at the evaluation time fell below the
    /// configured floor.
    #[error("unstable denominator: g_hat = {g_hat:e} below floor {floor:e}")]
    UnstableDenominator { g_hat: f64, floor: f64 },

    #[error("sample is empty")]
    EmptySample,

    #[error("invalid observation at index {index}: {reason}")]
    InvalidObservation { index: usize, reason: String },

    #[error("point ({t}, {z}) lies outside the support")]
    OutOfSupport { t: f64, z: f64 },

    #[error("time {0} lies where the censoring density vanishes")]
    ZeroCensoringDensity(f64),

    #[error("first factor of the bivariate kernel does not match the univariate kernel")]
    KernelMismatch,

    #[error("kernel fails {0}")]
    InvalidKernel(String),

    #[error("mark bandwidth exponent {0} < 1/5: the two estimators diverge at rate n^(2/5)")]
    Divergence(f64),

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("pilot density is nonpositive everywhere on the support box")]
    DegeneratePilot,

    #[error("no valid bandwidth candidate to select from")]
    SelectionFailure,

    #[error("{failures} of {total} replications failed (more than 1%)")]
    TooManyFailures { failures: usize, total: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
