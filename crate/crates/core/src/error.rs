use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch in {context}: expected {expected:?}, got {actual:?}")]
    Shape {
        context: &'static str,
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("input mismatch: {0}")]
    Mismatch(String),

    #[error("sample rate {actual} Hz does not match the configured {expected} Hz")]
    SampleRate { expected: u32, actual: u32 },

    #[error("unsupported audio format: {0}")]
    UnsupportedFormat(String),

    #[error("{}:{line}: {message}", path.display())]
    Config {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("malformed matrix file: {0}")]
    MatrixFormat(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Wav(#[from] hound::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn shape(
        context: &'static str,
        expected: (usize, usize),
        actual: (usize, usize),
    ) -> Self {
        Error::Shape {
            context,
            expected,
            actual,
        }
    }

    /// Process exit code used by the command-line front end.
    ///
    /// 2 usage/configuration, 3 input format, 4 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) | Error::Config { .. } => 2,
            Error::Empty(_)
            | Error::Mismatch(_)
            | Error::SampleRate { .. }
            | Error::UnsupportedFormat(_)
            | Error::MatrixFormat(_)
            | Error::Io(_)
            | Error::Wav(_) => 3,
            Error::Shape { .. } | Error::Numeric(_) => 4,
        }
    }
}
