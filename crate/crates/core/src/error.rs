use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Tensor or record dimensions do not line up.
    #[error("shape error: {0}")]
    Shape(String),

    /// An argument is outside its valid domain (rates, labels, names).
    #[error("parameter error: {0}")]
    Param(String),

    /// A binary or audio file does not follow its declared layout.
    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    /// Input data is too short or otherwise unusable.
    #[error("input error: {0}")]
    Input(String),

    /// A dataset or manifest violates a record invariant.
    #[error("data error: {0}")]
    Data(String),

    /// A configuration value is invalid; `key` is the dotted path.
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    /// Evaluation pool is missing the ground-truth candidate.
    #[error("evaluation setup error: {0}")]
    EvalSetup(String),

    /// A condition the code itself guarantees did not hold.
    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error in {context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Param(msg.into())
    }

    pub(crate) fn format(offset: u64, msg: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: msg.into(),
        }
    }

    pub(crate) fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }

    /// Process exit code: 2 for broken internal invariants, 1 for everything
    /// the caller can fix (data, config, IO).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Internal(_) => 2,
            _ => 1,
        }
    }
}
