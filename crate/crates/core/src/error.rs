use thiserror::Error;

/// Failure modes surfaced by the library.
///
/// Exit-code grouping used by the CLI: configuration problems map to 2,
/// missing artifacts to 3, and runtime failures to 4.
#[derive(Debug, Error)]
pub enum Error {
    /// Configuration file failed validation.
    #[error("invalid config: {0}")]
    Config(String),

    /// Spawn region has non-positive extent.
    #[error("invalid workspace: {0}")]
    InvalidWorkspace(String),

    /// Joint vector violates model limits.
    #[error("joint limit violated: {0}")]
    JointLimit(String),

    /// Rendered view contains no visible points.
    #[error("camera sees no scene geometry")]
    EmptyView,

    /// Segmentation produced an empty functional subset.
    #[error("no functional points in cloud")]
    NoFunctionalPart,

    /// Antipodal sampling found no valid finger pair.
    #[error("no two-finger grasp found")]
    NoGraspFound,

    /// Requested width lies outside the table's domain.
    #[error("grasp width {0} outside table range")]
    WidthOutOfRange(f64),

    /// Every lifted candidate was removed by the collision filter.
    #[error("no collision-free grasp candidate")]
    NoValidGrasp,

    /// Inverse kinematics failed to converge on the target.
    #[error("ik target unreachable: {0}")]
    Unreachable(String),

    /// Step was called on a finished episode.
    #[error("episode already finished")]
    EpisodeFinished,

    /// Action vector has the wrong length.
    #[error("bad action shape: expected {expected}, got {got}")]
    BadActionShape { expected: usize, got: usize },

    /// Batch inputs are inconsistent or non-finite.
    #[error("bad batch: {0}")]
    BadBatch(String),

    /// Dataset is unusable for the requested operation.
    #[error("bad dataset: {0}")]
    BadDataset(String),

    /// Required file was not found on disk.
    #[error("missing artifact: {0}")]
    MissingArtifact(String),

    /// Checkpoint header does not match the consuming model.
    #[error("incompatible checkpoint: {0}")]
    IncompatibleCheckpoint(String),

    /// Optimization diverged and the update was aborted.
    #[error("non-finite loss: {0}")]
    NonFiniteLoss(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidWorkspace(_) => 2,
            Error::MissingArtifact(_) => 3,
            _ => 4,
        }
    }
}
