use thiserror::Error;

/// Errors raised across the solver library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unsupported SBP order {0} (expected 2 or 4)")]
    UnsupportedOrder(usize),
    #[error("order-{order} operator needs at least {min} nodes, got {n}")]
    TooFewNodes { order: usize, n: usize, min: usize },
    #[error("invalid spacing {0}")]
    InvalidSpacing(f64),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("coefficient must be strictly positive, found {value} at node {index}")]
    NonPositiveCoefficient { index: usize, value: f64 },
    #[error("boundary curves do not close: corner mismatch {0:e}")]
    CornerMismatch(f64),
    #[error("non-positive Jacobian {value:e} in block {block} at node ({i}, {j})")]
    NonPositiveJacobian { block: usize, i: usize, j: usize, value: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("interface {index} is inconsistent: {reason}")]
    BadInterface { index: usize, reason: String },
    #[error("missing boundary data for block {block} side {side}")]
    MissingBoundaryData { block: usize, side: String },
    #[error("dense assembly of {unknowns} unknowns exceeds cap {cap}")]
    DenseCapExceeded { unknowns: usize, cap: usize },
    #[error("conjugate gradients did not converge: {iterations} iterations, relative residual {residual:e}")]
    CgNotConverged { iterations: usize, residual: f64 },
    #[error("field evaluation failed at ({x}, {y}): {reason}")]
    FieldEvaluation { x: f64, y: f64, reason: String },
    #[error("field-line map was built for a different domain")]
    StaleMap,
    #[error("reference norm is zero")]
    ZeroReferenceNorm,
    #[error("non-positive error value {0:e}")]
    NonPositiveError(f64),
    #[error("unknown field `{0}`")]
    UnknownField(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error("config: {0}")]
    Config(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
