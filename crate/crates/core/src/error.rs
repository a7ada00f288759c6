use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("singular quadratic form: {0}")]
    Singular(String),

    #[error("degenerate support: {0}")]
    Degenerate(String),

    #[error("point outside domain: {0}")]
    Domain(String),

    #[error("no convergence after {iterations} iterations (last residual {residual:e}, partial value {partial:e})")]
    Convergence {
        iterations: usize,
        residual: f64,
        partial: f64,
    },

    #[error("dimension {0} is not supported by this routine")]
    UnsupportedDimension(usize),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// Errors caused by malformed or out-of-contract input, as opposed to
    /// numerical breakdown during an otherwise valid computation.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Input(_)
                | Error::DimensionMismatch { .. }
                | Error::Domain(_)
                | Error::UnsupportedDimension(_)
                | Error::Degenerate(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

pub(crate) fn check_finite(what: &str, v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Input(format!("{what} has non-finite entries")))
    }
}
