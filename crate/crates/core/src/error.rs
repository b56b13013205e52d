use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid trit {value} at index {index}; expected -1, 0, or 1")]
    InvalidTrit { index: usize, value: i64 },

    #[error("bitstring must contain at least one element")]
    EmptyBitstring,

    #[error(
        "invalid bitstring literal character {chr:?} at index {index}; expected '1', '0', or 'm'"
    )]
    InvalidLiteral { index: usize, chr: char },

    #[error("position must contain at least one heap")]
    EmptyPosition,

    #[error("heap {index} holds {count} counters, exceeding capacity {capacity}")]
    CapacityExceeded {
        index: usize,
        count: u32,
        capacity: u32,
    },

    #[error("board has {total} counters, exceeding the {limit}-counter oracle budget")]
    OracleBudget { total: u32, limit: u32 },

    #[error("no moves available from a terminal position")]
    NoMoves,

    #[error("board encoding is malformed: {0}")]
    MalformedEncoding(String),

    #[error("batch size must be at least 1")]
    EmptyBatch,

    #[error("accuracy {0} is outside [0, 1]")]
    AccuracyOutOfRange(f64),

    #[error("noise fraction {0} is outside [0, 1]")]
    NoiseOutOfRange(f64),

    #[error("hidden size mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },

    #[error("learning rate must be finite and nonnegative, got {0}")]
    InvalidLearningRate(f64),

    #[error("model produced a non-finite value: {0}")]
    NonFinite(String),

    #[error("sampler kind {0} has no single bitstring length to sweep over")]
    NoSweepLength(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("checkpoint format version {found} is not supported (expected {expected})")]
    CheckpointVersion { found: u32, expected: u32 },

    #[error("nothing to export: {0}")]
    EmptyExport(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
