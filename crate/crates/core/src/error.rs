use thiserror::Error;

/// Errors produced by the inference engine and its building blocks.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MvcError {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid counts: {0}")]
    InvalidCounts(String),

    #[error("invalid simplex point: {0}")]
    InvalidPoint(String),

    #[error("budget exceeded: {what} requires {required}, budget is {budget}")]
    BudgetExceeded {
        what: &'static str,
        required: u128,
        budget: u128,
    },

    #[error("point lies on the simplex boundary (coordinate {index} is zero)")]
    BoundaryPoint { index: usize },

    #[error("degenerate cell: {0}")]
    DegenerateCell(String),

    #[error("degenerate slice along axis {axis}: count {count} of {n}")]
    DegenerateSlice { axis: usize, count: u32, n: u32 },

    #[error("search domain is empty")]
    EmptyDomain,

    #[error("invalid tolerance: {0}")]
    InvalidTolerance(String),
}

pub type Result<T, E = MvcError> = std::result::Result<T, E>;
