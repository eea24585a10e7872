use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by every layer of the crate.
///
/// The CLI maps `Contract` to exit code 2 and `Io`/`Format` to exit code 3.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke an operation's precondition (shape mismatch, bad argument).
    #[error("contract violation: {0}")]
    Contract(String),

    /// The measurement pipeline could not produce a value for this mask.
    #[error("measurement error: {0}")]
    Measurement(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A file was readable but its content is malformed.
    #[error("format error in {path}: {message}")]
    Format { path: PathBuf, message: String },

    /// Training diverged.
    #[error("non-finite loss at epoch {epoch}, batch {batch} (lr = {lr}): {detail}")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        lr: f64,
        detail: String,
    },
}

impl Error {
    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn measurement(msg: impl Into<String>) -> Self {
        Error::Measurement(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Contract(_) | Error::Measurement(_) | Error::NonFiniteLoss { .. } => 2,
            Error::Io { .. } | Error::Format { .. } => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Early-return with a contract violation when `cond` is false.
macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        if !$cond {
            return Err($crate::error::Error::Contract(format!($($arg)+)));
        }
    };
}
pub(crate) use ensure;
