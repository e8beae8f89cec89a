//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("incompatible operands: {0}")]
    IncompatibleOperands(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("multi-index length mismatch")]
    LengthMismatch,

    #[error("resonance test in approx mode requires a tolerance")]
    MissingTolerance,

    #[error("{0} is unsupported in approx mode")]
    UnsupportedInApprox(&'static str),

    #[error("no nonresonant divisor in the enumerated range")]
    DegenerateRange,

    #[error("subdiagonal rescaling factor must be positive")]
    InvalidScale,

    #[error("incomplete lower-degree prefix: {0}")]
    IncompletePrefix(String),

    #[error("internal solver assertion: {0}")]
    SolverAssertion(String),

    #[error("periodic orbit not found: {0}")]
    OrbitNotFound(String),

    #[error("ODE integration failed: {0}")]
    IntegrationFailure(String),

    #[error("linear part not diagonalizable: {0}")]
    NonDiagonalizable(String),

    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },

    #[error("invariant violation: {0}")]
    InvariantViolation(String),

    #[error("empty first-integral candidate list")]
    EmptyCandidateList,

    #[error("coefficient rationalization failed: {0}")]
    RationalizeFailure(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code contract: 1 for input/validation problems, 2 for
    /// computation failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. }
            | Error::InvariantViolation(_)
            | Error::DimensionMismatch { .. }
            | Error::LengthMismatch
            | Error::IncompatibleOperands(_)
            | Error::MissingTolerance
            | Error::InvalidScale
            | Error::EmptyCandidateList
            | Error::Io(_) => 1,
            _ => 2,
        }
    }

    /// Short machine-readable code for report footers.
    pub fn code(&self) -> &'static str {
        match self {
            Error::IncompatibleOperands(_) => "E_INCOMPATIBLE",
            Error::DimensionMismatch { .. } => "E_DIMENSION",
            Error::LengthMismatch => "E_LENGTH",
            Error::MissingTolerance => "E_NO_TOLERANCE",
            Error::UnsupportedInApprox(_) => "E_APPROX_UNSUPPORTED",
            Error::DegenerateRange => "E_DEGENERATE_RANGE",
            Error::InvalidScale => "E_INVALID_SCALE",
            Error::IncompletePrefix(_) => "E_INCOMPLETE_PREFIX",
            Error::SolverAssertion(_) => "E_SOLVER",
            Error::OrbitNotFound(_) => "E_ORBIT_NOT_FOUND",
            Error::IntegrationFailure(_) => "E_INTEGRATION",
            Error::NonDiagonalizable(_) => "E_NONDIAGONALIZABLE",
            Error::Parse { .. } => "E_PARSE",
            Error::InvariantViolation(_) => "E_INVARIANT",
            Error::EmptyCandidateList => "E_EMPTY_LIST",
            Error::RationalizeFailure(_) => "E_RATIONALIZE",
            Error::Io(_) => "E_IO",
        }
    }
}
