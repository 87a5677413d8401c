use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("image is degenerate: {0}")]
    DegenerateImage(String),

    #[error("requested {requested} superpixels but the image has only {pixels} pixels")]
    TooManySuperpixels { requested: usize, pixels: usize },

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("histogram is not normalized (sum = {sum})")]
    NotNormalized { sum: f64 },

    #[error("source set is empty")]
    EmptySources,

    #[error("vertex {0} is out of range")]
    InvalidVertex(usize),

    #[error("no label for superpixel {0}")]
    MissingLabel(usize),

    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(u32, u32, u32, u32),

    #[error("invalid stroke: {0}")]
    InvalidStroke(String),

    #[error("no pending proposal")]
    NoPendingProposal,

    #[error("no labels have been collected yet")]
    NoLabels,

    #[error("expected {expected} labels, got {got}")]
    LabelCount { expected: usize, got: usize },

    #[error("checkpoint does not match image (expected hash {expected}, got {got})")]
    CheckpointMismatch { expected: String, got: String },

    #[error("invalid checkpoint: {0}")]
    InvalidCheckpoint(String),

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
