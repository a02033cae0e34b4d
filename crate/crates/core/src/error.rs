use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("partition mismatch: N={left} vs N={right} (refine explicitly to a common partition)")]
    PartitionMismatch { left: usize, right: usize },

    #[error("matrix is not skew-symmetric (max |A + A^T| = {0:e})")]
    NotSkewSymmetric(f64),

    #[error("matrix is not a rotation (orthogonality defect {orthogonality:e}, det {det})")]
    NotRotation { orthogonality: f64, det: f64 },

    #[error("matrix size must be at least 2, got {0}")]
    MatrixSizeTooSmall(usize),

    #[error("expected {expected} coordinates, got {got}")]
    CoordinateCount { expected: usize, got: usize },

    #[error("time {0} outside [0, 1]")]
    TimeOutOfRange(f64),

    #[error("finite-difference stencil [t-h, t+h] = [{lo}, {hi}] leaves (0, 1)")]
    StencilOutOfRange { lo: f64, hi: f64 },

    #[error("refinement multiple must be at least 1")]
    ZeroRefinement,

    #[error("partition count must be at least 1")]
    EmptyPartition,

    #[error("radius must be positive and finite, got {0}")]
    InvalidRadius(f64),

    #[error("radius exponent must lie in (1/2, 1), got {0}")]
    InvalidExponent(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("zero-norm input")]
    ZeroNorm,

    #[error("empirical measures differ in size: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },

    #[error("empirical measure must contain at least one sample")]
    EmptyMeasure,

    #[error("exact assignment is capped at n = {cap}, got {n}")]
    ExactSolverCap { n: usize, cap: usize },

    #[error("sinkhorn did not converge in {iters} iterations (marginal violation {violation:e})")]
    NotConverged { iters: usize, violation: f64 },

    #[error("witness `{name}` violates the Lipschitz/bound check by {excess:e}")]
    WitnessViolation { name: String, excess: f64 },

    #[error("dense Jacobian capped at {cap} coordinates, got {n}")]
    DimensionCap { n: usize, cap: usize },

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("{0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
