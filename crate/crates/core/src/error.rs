use thiserror::Error;

/// Errors raised by the solvers, surrogates and instance I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("point is infeasible in block {block}: {detail}")]
    Infeasible { block: usize, detail: String },

    #[error("no closed-form minimizer for this surrogate/penalty/constraint pairing: {0}")]
    NoClosedForm(String),

    #[error("exact line search is not available for this problem; use the successive line search")]
    ExactLineSearchUnavailable,

    #[error("line search failed: no acceptable step within {max_exponent} backtracking steps")]
    LineSearchFailure { max_exponent: u32 },

    #[error("matrix is not symmetric positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("degenerate diagonal: {0}")]
    DegenerateDiagonal(String),

    #[error("degenerate direction: {0}")]
    DegenerateDirection(String),

    #[error("line search profile disagrees with direct evaluation: {0}")]
    ProfileMismatch(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("malformed instance file {path}: {detail}")]
    Format { path: String, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
