use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: invalid JSON: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: PNG decode failed: {source}")]
    PngDecode {
        path: PathBuf,
        #[source]
        source: png::DecodingError,
    },

    #[error("PNG encode failed: {0}")]
    PngEncode(#[from] png::EncodingError),

    #[error("invalid manifest: {0}")]
    Manifest(String),

    #[error("unmapped part index {index} at pixel ({x}, {y})")]
    UnmappedPartIndex { index: u8, x: u32, y: u32 },

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("value out of range at index {index}: {value}")]
    ValueOutOfRange { index: usize, value: f64 },

    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (u32, u32),
        actual: (u32, u32),
    },

    #[error("zero target dimension")]
    ZeroDimension,

    #[error("threshold {0} outside [0, 1]")]
    InvalidThreshold(f64),

    #[error("empty part mask")]
    EmptyPart,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("expected two lung components, found {0}")]
    NotEnoughComponents(usize),

    #[error("malformed prompt template: placeholder {placeholder} occurs {count} times")]
    Template {
        placeholder: &'static str,
        count: usize,
    },

    #[error(transparent)]
    Llm(#[from] LlmError),
}

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
}

/// Failures talking to the report endpoint.
#[derive(Debug, Error)]
pub enum LlmError {
    #[error("LLM config error: {0}")]
    Config(String),

    #[error("LLM endpoint returned HTTP {status}: {body}")]
    Transport { status: u16, body: String },

    #[error("LLM request failed: {0}")]
    Network(String),

    #[error("LLM request timed out")]
    Timeout,

    #[error("LLM response malformed: {0}")]
    Protocol(String),
}
