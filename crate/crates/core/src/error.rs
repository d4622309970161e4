use thiserror::Error;

/// Errors raised by the simulation and inference routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Inputs with inconsistent dimensions or out-of-range values.
    #[error("usage error: {0}")]
    Usage(String),
    /// An internal invariant was broken (e.g. a reaction drove a count negative).
    #[error("invariant violation: {0}")]
    Invariant(String),
    /// Non-finite values or integration blow-up.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// A truncated state space was too small to hold the requested distribution.
    #[error("state-space truncation at cap {cap} lost {lost_mass:e} probability mass")]
    Truncation { cap: usize, lost_mass: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Usage(msg.into()))
}
