//! Error type shared by all modules of the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// An argument left the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A caller-supplied precondition (a contract, not a numeric domain) failed.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Quadrature failed to reach the requested tolerance. Carries the best
    /// estimate so callers can decide whether it is still usable.
    #[error("quadrature did not converge: best estimate {estimate:e}, error estimate {error_estimate:e}")]
    QuadratureNotConverged { estimate: f64, error_estimate: f64 },

    /// A series evaluation hit its term cap before the tail bound fell
    /// below the requested tolerance.
    #[error("series did not converge within {terms} terms: partial sum {partial:e}")]
    SeriesNotConverged { partial: f64, terms: usize },

    /// The state recursion produced a non-finite value.
    #[error("solution diverged at step {step} (t = {time}) for order {order}")]
    Divergence { step: usize, time: f64, order: f64 },

    /// Requested grid exceeds a hard size cap (cubic-cost operations).
    #[error("grid too large: {steps} steps exceeds cap {cap}")]
    GridTooLarge { steps: usize, cap: usize },

    /// Regression input was unusable (fewer than 3 finite points, or
    /// non-positive values that cannot be log-transformed).
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
}
