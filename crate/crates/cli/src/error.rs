use flex_core::FlexError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("verification failed: {}", .0.join("; "))]
    Verification(Vec<String>),
}

impl CliError {
    /// 0 success, 1 verification failure, 2 configuration error, 3 IO error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Verification(_) => 1,
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl From<FlexError> for CliError {
    fn from(e: FlexError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
