use thiserror::Error;

/// Errors raised by the solvers, parameter builders and evaluators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("infeasible parameters: {0}")]
    Infeasible(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("iterates diverged at iteration {iteration}")]
    Diverged { iteration: usize },
    #[error("outer stage {stage}: {source}")]
    Stage { stage: usize, source: Box<SolverError> },
}

pub type Result<T> = std::result::Result<T, SolverError>;

pub(crate) fn check_len(got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(SolverError::DimensionMismatch { expected, got });
    }
    Ok(())
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(SolverError::InvalidInput(msg.into()))
}
