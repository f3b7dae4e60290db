use thiserror::Error;

/// Errors raised anywhere in the link chain, the detectors or the harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    Dimension {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("non-finite activation after layer {layer}")]
    NonFinite { layer: usize },

    #[error("invalid state: {0}")]
    State(String),

    #[error("framing error: {0}")]
    Framing(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("cannot fit normalization: feature {feature} has zero maximum")]
    ZeroScale { feature: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Wraps the error with a short description of what was being attempted.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}
