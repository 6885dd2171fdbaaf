use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] tokenobs::Error),

    #[error("config error: {0}")]
    Config(String),

    #[error("usage error: {0}")]
    Usage(String),
}

impl CliError {
    /// 2 parameter/usage, 3 I/O and format, 4 divergence, 5 numerical or verdict failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) => e.exit_code(),
            CliError::Config(_) | CliError::Usage(_) => 2,
        }
    }
}
