use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("no difference operator realises derivative order {order}")]
    MissingRealisation { order: u8 },

    #[error("derivative order {order} exceeds the cap of {cap}")]
    DerivativeOrderTooHigh { order: u8, cap: u8 },

    #[error("parse error at column {column}: {message}")]
    Parse { column: usize, message: String },

    #[error("polarisation needs k >= {required} arguments for degree {degree}, got {k}")]
    TooFewArguments { k: usize, required: usize, degree: u32 },

    #[error("theta must lie in [0, 1], got {0}")]
    ThetaOutOfRange(f64),

    #[error("expected {expected} arguments, got {got}")]
    ArgumentCount { expected: usize, got: usize },

    #[error("slot {slot} of a polarised term has degree {degree}; linear implicitness needs at most 2")]
    NonQuadraticSlot { slot: usize, degree: u32 },

    #[error("operator is not skew-symmetric")]
    NotSkew,

    #[error("Newton iteration did not converge at step {step} after {iterations} iterations (residual {residual:e})")]
    NewtonDiverged {
        step: usize,
        iterations: usize,
        residual: f64,
    },

    #[error("singular linear system at step {step} (dt = {dt}); try a smaller time step")]
    SingularSystem { step: usize, dt: f64 },

    #[error("linear solve residual {residual:e} exceeds tolerance {tolerance:e}")]
    ResidualCheck { residual: f64, tolerance: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("not enough data: {0}")]
    InsufficientData(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
