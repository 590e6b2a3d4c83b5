use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A value left the representable floating-point range.
    #[error("numeric range exceeded: {0}")]
    Range(String),

    /// An argument outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("quadrature did not converge: value {value:e}, estimated error {est_error:e} after {evaluations} evaluations")]
    NonConvergence {
        value: f64,
        est_error: f64,
        evaluations: u64,
    },

    #[error("post-selection removed every nonzero amplitude")]
    EmptyPostselection,

    #[error("state is not normalized (norm^2 = {0})")]
    NotNormalized(f64),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Turns a non-finite result into a range error.
pub(crate) fn finite(value: f64, what: impl FnOnce() -> String) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Range(what()))
    }
}
