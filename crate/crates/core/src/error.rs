use thiserror::Error;

/// Errors raised by the statistics, bootstrap and experiment layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown kernel id `{0}`")]
    UnknownKernel(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("sample too small: need n >= {min}, got {got}")]
    SampleTooSmall { min: usize, got: usize },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("non-finite coordinate at observation {index}")]
    NonFinite { index: usize },

    #[error("bootstrap size m must be >= {min}, got {got}")]
    BootstrapSizeTooSmall { min: u64, got: u64 },

    #[error("degenerate normalizer: {0}")]
    DegenerateNormalizer(String),

    #[error("degenerate kernel: {0}")]
    DegenerateKernel(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no target available: {0}")]
    NoTarget(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("malformed CSV at row {row}, column {column}: {message}")]
    MalformedCsv {
        row: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
