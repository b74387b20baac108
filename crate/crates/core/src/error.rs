use thiserror::Error;

/// Errors raised by graph construction, model evaluation and integration.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Malformed shapes, indices or dimensions.
    #[error("structural error: {0}")]
    Structural(String),

    /// Input outside the domain of a model or operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A non-finite value appeared. `last_good_time` is set when raised by the integrator.
    #[error("numeric error: {message}")]
    Numeric {
        message: String,
        last_good_time: Option<f64>,
    },

    #[error("singular matrix: {0}")]
    SingularMatrix(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unsupported dimension {dimension}: {reason}")]
    UnsupportedDimension { dimension: usize, reason: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn structural(msg: impl Into<String>) -> Self {
        Error::Structural(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric {
            message: msg.into(),
            last_good_time: None,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
