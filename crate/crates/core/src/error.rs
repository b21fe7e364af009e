use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("corrupt stream: {0}")]
    CorruptStream(String),

    #[error("bitstream/model mismatch: {0}")]
    ConfigMismatch(String),

    #[error("similarity backend unavailable: {0}")]
    BackendUnavailable(String),

    #[error("no ground-truth mask registered for image {0:?}")]
    MissingGroundTruth(String),

    #[error("ROI is empty")]
    EmptyRoi,

    #[error("missing model: {0}")]
    MissingModel(String),

    #[error("missing prerequisite: {0}")]
    MissingPrerequisite(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
