use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("observation ({row}, {col}) is outside a {dim}x{dim} matrix")]
    IndexOutOfRange { row: usize, col: usize, dim: usize },

    #[error("observation ({row}, {col}) appears more than once")]
    DuplicateEntry { row: usize, col: usize },

    #[error("observation set is empty")]
    EmptyObservations,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("matrix is identically zero")]
    ZeroMatrix,

    #[error("integrator step collapsed below {min_step:e} at t = {t}")]
    StepCollapse { t: f64, min_step: f64 },

    #[error("root bracketing failed: {0}")]
    BracketFailure(String),

    #[error("observation pattern is not a permutation pattern")]
    NotPermutationPattern,

    #[error("closed-form pre-training limit undefined at ({row}, {col}): {reason}")]
    PretrainUndefined { row: usize, col: usize, reason: String },

    #[error("linear algebra failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
