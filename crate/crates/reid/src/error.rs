use std::path::PathBuf;

use thiserror::Error;

/// Failure categories of the toolchain; each maps to a process exit code.
#[derive(Debug, Error)]
pub enum ToolError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Image(#[from] crate::image_io::ImageError),
}

impl ToolError {
    pub fn exit_code(&self) -> u8 {
        match self {
            ToolError::Usage(_) => 1,
            ToolError::Data(_) | ToolError::Io { .. } | ToolError::Image(_) => 2,
            ToolError::Numeric(_) => 3,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| ToolError::Io { path, source }
    }
}

impl From<reid_core::Error> for ToolError {
    fn from(e: reid_core::Error) -> Self {
        match e {
            reid_core::Error::Numeric(_) => ToolError::Numeric(e.to_string()),
            other => ToolError::Data(other.to_string()),
        }
    }
}

pub type Result<T, E = ToolError> = std::result::Result<T, E>;
