//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by distribution evaluation, sampling and model fitting.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// An argument lies outside the supported domain of a function.
    #[error("domain error: {0}")]
    Domain(String),

    /// Matrix dimensions do not conform.
    #[error("dimension mismatch: {0}")]
    Shape(String),

    /// A scale matrix (or an update of one) is not positive definite.
    #[error("matrix not positive definite: {0}")]
    NotPositiveDefinite(String),

    /// The density is unbounded at the evaluation point.
    #[error("density unbounded: {0}")]
    UnboundedDensity(String),

    /// A conditional-maximization update has a degenerate denominator.
    #[error("singular CM update: {0}")]
    SingularUpdate(String),

    /// An observation makes the E-step conditional law degenerate.
    #[error("degenerate observation: {0}")]
    DegenerateObservation(String),

    /// A component log-density evaluated to a non-finite value.
    #[error("non-finite log-density at observation {obs}, component {component}")]
    NonFiniteDensity { obs: usize, component: usize },

    /// A mixture component lost effectively all of its mass.
    #[error("component {component} died (effective weight {weight:.3e})")]
    ComponentDied { component: usize, weight: f64 },

    /// The log-likelihood decreased beyond round-off, the signature of a
    /// numerically degenerate state (the exact-arithmetic ECM cannot decrease it).
    #[error("log-likelihood decreased by {drop:.3e} at iteration {iteration}")]
    MonotonicityLost { iteration: usize, drop: f64 },

    /// Every initialization of a fit aborted.
    #[error("all {n_starts} starts failed; last cause: {last}")]
    AllStartsFailed { n_starts: usize, last: String },

    /// Invalid user-supplied configuration or data.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
