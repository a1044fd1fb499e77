use hbrisk::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("{0}")]
    Convergence(String),

    #[error("monte carlo validation failed: {0}")]
    McFailure(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Convergence(_) => 3,
            CliError::McFailure(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Domain(_)
            | CoreError::DegenerateInput(_)
            | CoreError::LengthMismatch { .. }
            | CoreError::Orthonormality(_) => CliError::Validation(e.to_string()),
            CoreError::ConvergenceFailure { .. }
            | CoreError::BracketFailure { .. }
            | CoreError::Numerical(_)
            | CoreError::InvariantViolation(_) => CliError::Convergence(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
