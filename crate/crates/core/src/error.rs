use std::path::PathBuf;

/// Errors produced by the segmentation engine.
#[derive(Debug, thiserror::Error)]
pub enum CocaError {
    /// An invalid or inconsistent configuration value.
    #[error("configuration error: {0}")]
    Config(String),
    /// Tensor or image shapes that do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),
    /// A numerical condition that makes the result undefined.
    #[error("numeric error: {0}")]
    Numeric(String),
    /// Metrics were requested over a region with no scored pixels.
    #[error("scored region is empty")]
    EmptyRegion,
    /// A file whose contents could not be decoded.
    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CocaError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Self::Config(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Self::Shape(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    /// Process exit code for this error: 1 for I/O, 2 for configuration and
    /// shape problems, 3 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Io { .. } | Self::Format { .. } => 1,
            Self::Config(_) | Self::Shape(_) => 2,
            Self::Numeric(_) | Self::EmptyRegion => 3,
        }
    }
}

pub type Result<T, E = CocaError> = std::result::Result<T, E>;
