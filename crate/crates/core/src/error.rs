use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the core library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed tensor header: {0}")]
    MalformedHeader(String),

    #[error("unsupported dtype {0:?}")]
    UnsupportedDtype(String),

    #[error("truncated tensor payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },

    #[error("invalid shape {0:?}: every dimension must be >= 1")]
    InvalidShape(Vec<usize>),

    #[error("buffer length {len} does not match shape {shape:?}")]
    LengthMismatch { shape: Vec<usize>, len: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("unexpected dtype: expected {expected}, found {found}")]
    DtypeMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("invalid run-length encoding: {0}")]
    InvalidRle(String),

    #[error("pixel ({row}, {col}) is not normalized: sum {sum}")]
    NotNormalized { row: usize, col: usize, sum: f64 },

    #[error("pixel ({row}, {col}) class {class} has out-of-range probability {value}")]
    ProbabilityOutOfRange {
        row: usize,
        col: usize,
        class: usize,
        value: f32,
    },

    #[error("label {label} at index {index} is out of range for {classes} classes")]
    LabelOutOfRange {
        index: usize,
        label: u8,
        classes: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("image {width}x{height} too small: {reason}")]
    ImageTooSmall {
        width: usize,
        height: usize,
        reason: String,
    },

    #[error("center ({x}, {y}) outside {width}x{height} image")]
    CenterOutOfBounds {
        x: usize,
        y: usize,
        width: usize,
        height: usize,
    },

    #[error("masks overlap at pixel index {0}")]
    OverlappingMasks(usize),

    #[error("no labeled pixels")]
    NoLabeledPixels,

    #[error("no class has any pixels")]
    EmptyPrototypes,

    #[error("prototype for class {0} has zero norm")]
    ZeroNormPrototype(usize),

    #[error("class {0} is referenced but its prototype is absent")]
    AbsentClass(usize),

    #[error("pixel {0} has a zero-norm feature vector")]
    ZeroNormFeature(usize),

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("empty class subset")]
    EmptySubset,

    #[error("image codec error on {path}: {message}")]
    Image { path: PathBuf, message: String },

    #[error("JSON error on {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn image(path: impl Into<PathBuf>, err: impl std::fmt::Display) -> Self {
        Error::Image {
            path: path.into(),
            message: err.to_string(),
        }
    }
}
