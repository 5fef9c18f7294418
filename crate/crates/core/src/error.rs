use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("singular matrix: pivot {pivot:e} below threshold {threshold:e} at column {column}")]
    SingularMatrix { column: usize, pivot: f64, threshold: f64 },
    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("step size underflow at t = {t}: h = {step:e} < {min_step:e}")]
    StepSizeUnderflow { t: f64, step: f64, min_step: f64 },
    #[error("maximum number of steps ({max_steps}) exceeded at t = {t}")]
    MaxStepsExceeded { t: f64, max_steps: usize },
    #[error("non-finite state or derivative at t = {t}")]
    NonFiniteState { t: f64 },
    #[error("time {t} outside trajectory span [{start}, {end}]")]
    TimeOutOfRange { t: f64, start: f64, end: f64 },
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("iteration did not converge: {0}")]
    NotConverged(String),
    #[error("no closed-form reference solution for {0}")]
    NoReference(String),
    #[error("unknown problem '{0}'")]
    UnknownProblem(String),
    #[error("unknown parameter '{name}' for problem {problem}")]
    UnknownParameter { problem: String, name: String },
    #[error("unknown jacobian strategy '{0}'")]
    UnknownStrategy(String),
}

impl Error {
    /// True for failures raised by the initial-value integrator.
    pub fn is_integration_failure(&self) -> bool {
        matches!(
            self,
            Error::StepSizeUnderflow { .. }
                | Error::MaxStepsExceeded { .. }
                | Error::NonFiniteState { .. }
                | Error::TimeOutOfRange { .. }
        )
    }
}
