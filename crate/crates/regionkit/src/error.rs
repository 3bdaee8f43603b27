use std::path::{Path, PathBuf};

use serde::Serialize;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("config: {0}")]
    Config(String),
    #[error("http: {0}")]
    Http(String),
    #[error(transparent)]
    Core(#[from] regionkit_core::Error),
    /// A hard dataset or output invariant failed.
    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub fn format(path: impl AsRef<Path>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.as_ref().to_path_buf(),
            message: message.into(),
        }
    }

    /// 1 for invariant failures, 2 for I/O, format and configuration problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Core(_) | Error::Invariant(_) => 1,
            Error::Io { .. } | Error::Format { .. } | Error::Config(_) | Error::Http(_) => 2,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Format { .. } => "format",
            Error::Config(_) => "config",
            Error::Http(_) => "http",
            Error::Core(_) => "core",
            Error::Invariant(_) => "invariant",
        }
    }

    pub fn report(&self) -> ErrorReport {
        let path = match self {
            Error::Io { path, .. } | Error::Format { path, .. } => Some(path.display().to_string()),
            _ => None,
        };
        ErrorReport {
            kind: self.kind(),
            message: self.to_string(),
            path,
            exit_code: self.exit_code(),
        }
    }
}

/// JSON body printed on stderr when a command fails.
#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub kind: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    pub exit_code: i32,
}
