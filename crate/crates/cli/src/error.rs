use c2bnvae_core::Error;

/// Failures grouped by process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Training(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Training(_) => 3,
        }
    }

    /// Wraps a core error raised while training a generator.
    pub fn training(context: &str, e: Error) -> Self {
        CliError::Training(format!("{context}: {e}"))
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::NonFiniteLoss { .. } => CliError::Training(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}
