use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the engine.
///
/// The variants are grouped so a front end can map them onto stable exit
/// codes: [`Error::is_config`] and [`Error::is_data`] cover the two
/// user-facing classes, everything else is a runtime failure.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("invalid architecture {arch:?}: {reason}")]
    Arch { arch: String, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("label {label} out of range for {classes} classes")]
    Label { label: usize, classes: usize },

    #[error("{}: {msg} (at byte offset {offset})", path.display())]
    Format {
        path: PathBuf,
        offset: u64,
        msg: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot write {}: {source}", path.display())]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("serialization failed: {0}")]
    Serialize(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, offset: u64, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            offset,
            msg: msg.into(),
        }
    }

    /// Invalid user-supplied configuration (bad flags, architecture strings,
    /// dimension mismatches detected before work starts).
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Arch { .. } | Error::Config(_))
    }

    /// Missing, unreadable or malformed dataset files.
    pub fn is_data(&self) -> bool {
        matches!(self, Error::Format { .. } | Error::Io { .. })
    }
}
