use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("solver error: {0}")]
    Solver(#[from] hetdata_core::Error),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(hetdata_core::Error::Validation(_)) => 2,
            CliError::Solver(_) => 3,
            CliError::Verification(_) => 1,
            CliError::Io(_) => 2,
        }
    }
}
