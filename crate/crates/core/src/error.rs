use thiserror::Error;

/// Errors raised by the boosting library.
#[derive(Debug, Error)]
pub enum BoostError {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("parse error: {0}")]
    Format(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl BoostError {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        BoostError::Input(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        BoostError::Parse {
            line,
            message: msg.into(),
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        BoostError::Config(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, BoostError>;
