use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments, unreadable or invalid scenario files.
    #[error("{0}")]
    Usage(String),
    /// A requested analysis did not pass.
    #[error("{0}")]
    Analysis(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] cdg_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Analysis(_) => 1,
            CliError::Core(cdg_core::Error::Numeric { .. }) => 1,
            CliError::Usage(_) | CliError::Io { .. } | CliError::Core(_) => 2,
        }
    }

    pub(crate) fn io(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> CliError {
        let context = context.into();
        move |source| CliError::Io { context, source }
    }
}
