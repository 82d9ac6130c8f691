use std::path::PathBuf;

/// Errors raised anywhere in the setup or solve pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("index ({row}, {col}) out of range for a {nrows}x{ncols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        nrows: usize,
        ncols: usize,
    },

    #[error("dimension mismatch in {op}: expected {expected}, got {got}")]
    DimensionMismatch {
        op: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("partition is not a disjoint cover of 0..{n}: {reason}")]
    InvalidPartition { n: usize, reason: String },

    #[error("diagonal entry of row {row} is {value:e}; Jacobi relaxation needs a nonzero diagonal")]
    ZeroDiagonal { row: usize, value: f64 },

    #[error("state {state} is absorbing (self-transition probability 1)")]
    AbsorbingState { state: usize },

    #[error("fine point {point} has no coarse neighbour within path length 3")]
    IsolatedFinePoint { point: usize },

    #[error("column {col} of the interpolation operator is empty")]
    EmptyInterpolationColumn { col: usize },

    #[error("row {row} of the interpolation operator is empty")]
    EmptyInterpolationRow { row: usize },

    #[error("mass matrix is numerically singular (condition estimate {cond:e})")]
    SingularMass { cond: f64 },

    #[error("zero denominator in Rayleigh quotient")]
    ZeroRayleighDenominator,

    #[error("iterate collapsed to zero after {iteration} iterations")]
    IterateCollapsed { iteration: usize },

    #[error("dense eigensolver failed to converge")]
    EigenSolve,

    #[error("dense operator of size {n} exceeds the limit {limit}")]
    TooLarge { n: usize, limit: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("setup residual increased from {before:e} to {after:e} at cycle {cycle}")]
    ResidualIncreased { cycle: usize, before: f64, after: f64 },

    #[error("degenerate point set: {0}")]
    DegeneratePoints(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("chain failed validation: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
