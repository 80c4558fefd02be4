use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid polytope: {0}")]
    InvalidPolytope(String),

    #[error("solver failure: {0}")]
    SolverFailure(String),

    #[error("steering angle {0} rad is at or beyond the tangent singularity")]
    SingularSteering(f64),

    #[error("classification error undefined with zero total samples")]
    EmptyTrainingSet,

    #[error("unknown sensor id {0}")]
    UnknownSensor(usize),

    #[error("curve fit is degenerate: {0}")]
    DegenerateFit(String),

    #[error("invalid point: {0}")]
    InvalidPoint(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("value {value} outside [{lo}, {hi}]")]
    OutOfBounds { value: f64, lo: f64, hi: f64 },

    #[error("initial trajectory is infeasible: {0}")]
    InfeasibleSeed(String),

    #[error("no progress: {0}")]
    NoProgress(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Errors caused by bad user input rather than a runtime failure.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Parse(_) | Error::Validation(_) | Error::InvalidPolytope(_))
    }
}
