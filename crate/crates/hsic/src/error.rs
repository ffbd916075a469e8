use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("sample too small: need n >= {needed}, got n = {got}")]
    SampleTooSmall { needed: usize, got: usize },

    #[error("degenerate sample: zero pairwise spread on the {side} side")]
    DegenerateSample { side: &'static str },

    #[error("bandwidth collection is empty for the requested parameters")]
    EmptyCollection,

    #[error("relative error undefined: reference power is zero")]
    UndefinedRelativeError,

    #[error("csv error at row {row}: {message}")]
    Csv { row: usize, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
