use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("point ({x}, {y}) lies outside the terrain extent")]
    OutOfBounds { x: f64, y: f64 },

    #[error("invalid position: {0}")]
    InvalidPosition(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported frequency {frequency_hz} Hz: model valid up to 6 GHz")]
    UnsupportedFrequency { frequency_hz: f64 },

    #[error("path contains an RIS interaction; evaluate it through the RIS cascade model")]
    DelegatedInteraction,

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("no coverage: every sweep measurement is the no-signal sentinel")]
    NoCoverage,

    #[error("no cell is covered by every compared RIS kind")]
    NoCommonCoverage,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("config line {line}, key `{key}`: {message}")]
    ConfigKey {
        line: usize,
        key: String,
        message: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
