use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{source_name}: {message}")]
    Parse { source_name: String, message: String },

    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },

    #[error(transparent)]
    Core(#[from] peu_core::Error),
}

impl CliError {
    pub(crate) fn parse(source_name: &str, message: impl ToString) -> Self {
        CliError::Parse { source_name: source_name.to_string(), message: message.to_string() }
    }

    /// 2 for bad input, 3 when the input is persistently exciting and no
    /// counterexample exists, 4 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Parse { .. } | CliError::Io { .. } => 2,
            CliError::Core(e) if e.is_input_error() => 2,
            CliError::Core(peu_core::Error::NotATrajectory { .. } | peu_core::Error::Unsupported(_)) => 2,
            CliError::Core(peu_core::Error::PersistentlyExciting { .. }) => 3,
            CliError::Core(_) => 4,
        }
    }
}
