use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error(transparent)]
    Model(#[from] dimer_sg::Error),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    /// A computed number was NaN or infinite.
    #[error("non-finite value in column {0}")]
    NonFinite(String),

    /// The command ran but its own pass/fail check failed.
    #[error("check failed: {0}")]
    Check(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Model(dimer_sg::Error::Accuracy { .. } | dimer_sg::Error::CostGuard(_)) => 4,
            CliError::Model(_) | CliError::Io(_) => 3,
            CliError::NonFinite(_) | CliError::Check(_) => 4,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
