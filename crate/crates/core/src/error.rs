use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum HjError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not positive semidefinite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid would hold more than {budget} points")]
    GridBudgetExceeded { budget: usize },

    #[error("enumeration of {configs} configurations exceeds the budget of {budget}")]
    EnumerationBudgetExceeded { configs: u128, budget: u128 },

    #[error("grid function has no finite value")]
    AllInfinite,

    #[error("empty grid")]
    EmptyGrid,

    #[error("point outside grid radius: |x| = {norm} > {radius}")]
    OutsideGrid { norm: f64, radius: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, HjError>;
