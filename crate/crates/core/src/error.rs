//! Error type shared by all modules.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Quadrature bounds are degenerate or reversed.
    #[error("invalid integration domain: {0}")]
    InvalidDomain(String),

    /// An integrand produced NaN or infinity; aborting is deliberate so
    /// domain errors near singular endpoints cannot be silently skipped.
    #[error("integrand evaluated to a non-finite value: {0}")]
    NonFiniteIntegrand(String),

    /// Refinement budget exhausted before reaching the requested tolerance.
    /// Carries the best estimate so callers can inspect how close it got.
    #[error("failed to converge ({context}): value={value}, error_estimate={error_estimate}, evaluations={evaluations}")]
    NonConvergence {
        context: &'static str,
        value: f64,
        error_estimate: f64,
        evaluations: usize,
    },

    /// The target of a monotone inversion lies outside the bracketed range.
    #[error("target outside bracket: {0}")]
    BracketInvalid(String),

    /// Argument outside the mathematical domain of a scattering/kernel map.
    #[error("domain error: {0}")]
    DomainError(String),

    /// A DSMC acceptance probability exceeded 1 because the speed majorant
    /// was stale.
    #[error("collision rate overflow: {0}")]
    RateOverflow(String),

    /// Velocity exponent outside the range the simulator supports.
    #[error("invalid exponent: {0}")]
    InvalidExponent(String),

    /// Simulation configuration failed validation.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// I/O failure while reading or writing artifacts.
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
