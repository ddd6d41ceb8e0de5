use std::path::PathBuf;

/// Errors produced by the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("format error in {source_name}: {message}")]
    Format {
        source_name: String,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("empty raster")]
    EmptyRaster,

    #[error("empty sketch: {0}")]
    EmptySketch(String),

    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimensionMismatch { left: (u32, u32), right: (u32, u32) },

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("correspondence error: {0}")]
    Correspondence(String),

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("disturber kind mismatch: expected {expected}, got {actual}")]
    KindMismatch { expected: String, actual: String },

    #[error("training diverged at epoch {epoch}")]
    Divergence { epoch: usize },

    #[error("missing model: {0}")]
    MissingModel(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image error: {0}")]
    Image(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the file system rather than by the data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. } | Error::Image(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
