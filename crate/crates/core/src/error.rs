use thiserror::Error;

/// Errors surfaced by model, training, data and explanation code.
#[derive(Debug, Error)]
pub enum FeamoeError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("exact Shapley enumeration supports at most {max} features, got {got}")]
    TooManyFeatures { got: usize, max: usize },

    #[error("degenerate kernel regression system: {0}")]
    DegenerateKernelSystem(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("csv row {row}: {message}")]
    CsvRow { row: u64, message: String },

    #[error("stream position {position}: {source}")]
    Stream {
        position: u64,
        #[source]
        source: Box<FeamoeError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, FeamoeError>;
