use thiserror::Error;

/// Errors produced by the library.
///
/// The variants are grouped the way the CLI maps them to exit codes:
/// validation problems (bad shapes, bad inputs) versus numerical problems
/// (precision loss, solvers that did not converge, refused budgets).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("inconsistent input: {0}")]
    Inconsistent(String),

    #[error("insufficient precision: {0}")]
    Precision(String),

    #[error("did not converge: {0}")]
    Unconverged(String),

    #[error("budget refused: {reason} (required {required} samples, cap {cap})")]
    Budget {
        reason: String,
        required: f64,
        cap: f64,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// True for errors caused by numerics rather than by malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Precision(_) | Error::Unconverged(_) | Error::Budget { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

macro_rules! validation {
    ($($arg:tt)*) => {
        $crate::error::Error::Validation(format!($($arg)*))
    };
}

macro_rules! shape {
    ($($arg:tt)*) => {
        $crate::error::Error::Shape(format!($($arg)*))
    };
}

pub(crate) use shape;
pub(crate) use validation;
