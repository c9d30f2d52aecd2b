use thiserror::Error;

/// Errors produced by the normalization toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("selected region contains no pixels")]
    EmptySelection,

    #[error("channel {channel} has zero mean")]
    ZeroMean { channel: usize },

    #[error("histogram is degenerate (constant channel)")]
    DegenerateHistogram,

    #[error("no blobs found in the area range")]
    NoBlobsFound,

    #[error("channel {channel} is constant")]
    DegenerateChannel { channel: usize },

    #[error("zero RGB vector")]
    ZeroVector,

    #[error("no pixel pair had two non-zero vectors")]
    NoValidPixels,

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("invalid transform: {0}")]
    InvalidTransform(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid reference profile: {0}")]
    InvalidProfile(String),

    #[error("scene cannot be placed: {0}")]
    SpecInfeasible(String),

    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),

    #[error("image {index}: {source}")]
    InImage {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Codec(#[from] image::ImageError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
