use std::fmt::Display;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

/// Top-level failure of a command. Each variant maps to one exit code.
#[derive(Debug, Error)]
pub enum Error {
    /// Bad flag, key or value: exit 2.
    #[error("config error: {0}")]
    Config(String),
    /// Reading or writing a file failed: exit 3.
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    /// An input file exists but does not parse: exit 3.
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
    /// Inputs are well-formed but violate a precondition (unlabeled data for
    /// training, dendrite mismatch, ...): exit 4.
    #[error("{0}")]
    Domain(String),
}

impl Error {
    pub fn io(path: &Path, source: io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn format(path: &Path, message: impl Display) -> Self {
        Error::Format {
            path: path.to_path_buf(),
            message: message.to_string(),
        }
    }

    pub fn config(message: impl Display) -> Self {
        Error::Config(message.to_string())
    }

    pub fn domain(message: impl Display) -> Self {
        Error::Domain(message.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Io { .. } | Error::Format { .. } => 3,
            Error::Domain(_) => 4,
        }
    }
}
