use std::path::PathBuf;

/// Errors raised across the matching pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unsupported or malformed input: {0}")]
    Format(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("coordinate ({x:.3}, {y:.3}) outside interpolation support")]
    Domain { x: f64, y: f64 },

    #[error("normal matrix is rank deficient")]
    Rank,

    #[error("non-finite value encountered: {0}")]
    Numeric(&'static str),

    #[error("model estimation failed: {0}")]
    Estimation(String),

    #[error("window does not fit inside the raster")]
    WindowOutOfBounds,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
