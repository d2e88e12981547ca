use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("rotation angle {angle} rad is outside the principal branch of the log map")]
    Domain { angle: f64 },

    #[error("point is behind the camera (z = {z})")]
    BehindCamera { z: f64 },

    #[error("invalid inverse depth {value}")]
    InvalidDepth { value: f64 },

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: String, actual: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("reduced system is singular at pose {pose}")]
    Singular { pose: usize },

    #[error("{path}: parse error at byte {offset}: {message}")]
    ParseBytes {
        path: PathBuf,
        offset: usize,
        message: String,
    },

    #[error("{path}:{line}: parse error: {message}")]
    ParseLine {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("no jointly valid samples: {0}")]
    NoOverlap(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("degenerate alignment: {0}")]
    DegenerateAlignment(String),

    #[error("association failed: {0}")]
    Association(String),

    #[error("provider does not cover edge ({0}, {1})")]
    Coverage(usize, usize),

    #[error("no valid pixels")]
    NoValidPixels,
}

impl Error {
    pub(crate) fn shape(expected: impl ToString, actual: impl ToString) -> Self {
        Error::Shape {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
