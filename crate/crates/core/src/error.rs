use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("conditioning context has zero probability")]
    ZeroProbabilityContext,

    #[error("iterative scaling did not converge after {iterations} cycles (marginal error {achieved_error:e})")]
    ConvergenceFailure {
        iterations: usize,
        achieved_error: f64,
    },

    #[error("numeric failure: {0}")]
    NumericFailure(String),

    #[error("precondition violated: {0}")]
    PreconditionViolation(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
