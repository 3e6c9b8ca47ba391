use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("scorer failed for frame `{frame_id}` crop {crop}: {message}")]
    Scorer {
        frame_id: String,
        crop: usize,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to decode {}: {message}", path.display())]
    Decode { path: PathBuf, message: String },

    #[error("failed to load dataset: {0}")]
    Load(String),

    #[error("frame `{frame_id}`: {source}")]
    Frame {
        frame_id: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by user-supplied data rather than the environment.
    pub fn is_data_error(&self) -> bool {
        match self {
            Error::InvalidInput(_) | Error::Decode { .. } | Error::Load(_) | Error::Scorer { .. } => true,
            Error::Io { .. } => false,
            Error::Frame { source, .. } => source.is_data_error(),
        }
    }
}
