use thiserror::Error;

/// Errors raised by data validation, the solvers and the inference step.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value in {array} at row {row}{}", .column.map(|c| format!(", column {c}")).unwrap_or_default())]
    NonFinite {
        array: &'static str,
        row: usize,
        column: Option<usize>,
    },

    #[error("need at least 2 observations, got {0}")]
    TooFewObservations(usize),

    #[error("need at least one treatment column")]
    NoTreatments,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite intermediate value in {0}")]
    NumericalFailure(&'static str),

    #[error("first-stage residuals collinear (condition number {condition:.3e})")]
    Collinear { condition: f64 },

    #[error("simulation failed: {failed} of {total} replications failed")]
    TooManyFailures { failed: usize, total: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
