use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Core(#[from] mzsim::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Exit-code contract: 0 success, 2 configuration error,
    /// 3 runtime/topology error, 4 i/o error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(mzsim::Error::Config(_))
            | CliError::Core(mzsim::Error::InvalidArgument(_)) => 2,
            CliError::Core(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

pub fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Core(mzsim::Error::Config(msg.into()))
}
