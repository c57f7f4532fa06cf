use thiserror::Error;

/// Errors raised by the numerical core and the experiment harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NonSquare { rows: usize, cols: usize },

    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("matrix is not Hermitian (asymmetry {asymmetry:.3e})")]
    NotHermitian { asymmetry: f64 },

    #[error("{0} did not converge within the iteration cap")]
    ConvergenceFailure(&'static str),

    #[error("empty input")]
    EmptyInput,

    #[error("matrix exponential overflowed")]
    Overflow,

    #[error("invalid model shape: {0}")]
    BadShape(String),

    #[error("detection efficiency must lie in (0, 1], got {0}")]
    BadEta(f64),

    #[error("Hamiltonian is not Hermitian (asymmetry {asymmetry:.3e})")]
    NonHermitianH { asymmetry: f64 },

    #[error("density matrix has non-positive trace {0}")]
    ZeroTrace(f64),

    #[error("step too large: trace before renormalization was {trace}")]
    StepTooLarge { trace: f64 },

    #[error("jump requested from a dark state (jump intensity {intensity:.3e})")]
    JumpFromDarkState { intensity: f64 },

    #[error("misspecified filter hit a dark-state jump at step {step} (t = {time})")]
    MisspecifiedDarkJump { step: usize, time: f64 },

    #[error("wrong detection mode: {0}")]
    WrongDetection(&'static str),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid time {time} is not aligned with the simulation record: {reason}")]
    GridMisaligned { time: f64, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// Process exit status for the command-line tool: `1` for invalid
    /// input, `2` for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonFinite
            | Error::ConvergenceFailure(_)
            | Error::Overflow
            | Error::StepTooLarge { .. }
            | Error::JumpFromDarkState { .. }
            | Error::MisspecifiedDarkJump { .. } => 2,
            _ => 1,
        }
    }
}
