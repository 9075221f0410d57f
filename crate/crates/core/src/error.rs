use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch at node {node} ({op}): {detail}")]
    Shape {
        node: usize,
        op: &'static str,
        detail: String,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("simulation diverged: {0}")]
    SimUnstable(String),
    #[error("no cloth vertex within grasp radius of pick point")]
    GraspMiss,
    #[error("training diverged: {0}")]
    TrainDiverged(String),
    #[error("registration failed: {0}")]
    Registration(String),
    #[error("degenerate geometry: {0}")]
    Degenerate(String),
    #[error("dataset error: {0}")]
    Dataset(String),
    #[error("unsupported format version {0}")]
    UnsupportedVersion(String),
    #[error("malformed file {path}: {detail}")]
    Malformed { path: String, detail: String },
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
