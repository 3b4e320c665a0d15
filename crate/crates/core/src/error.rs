use std::path::PathBuf;

use crate::geom::Pose;

/// Errors raised anywhere in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("scene has neither an obstacle cloud nor a distance grid")]
    MissingObstacles,

    #[error("requested {requested} points but the cloud only has {available}")]
    InsufficientPoints { requested: usize, available: usize },

    #[error("unknown object `{0}`")]
    UnknownObject(String),

    #[error("no valid pose found after {rejections} consecutive rejections")]
    SceneTooCluttered { rejections: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("time gradient norm {norm:e} is too small to define a speed")]
    DegenerateGradient { norm: f64 },

    #[error("loss became non-finite at epoch {epoch}, batch {batch}")]
    NanLoss { epoch: usize, batch: usize },

    #[error("marching did not meet after {iterations} iterations (gap {gap:.4})")]
    NoConvergence {
        iterations: usize,
        gap: f64,
        start_chain: Vec<Pose>,
        goal_chain: Vec<Pose>,
    },

    #[error("start and goal rotations are identical; no in-place rotation is possible")]
    DegenerateDecouple,

    #[error("planning failed: {reason} (best grasp coverage {best_coverage:.3})")]
    PlanFailure {
        reason: String,
        deepest_infeasible: Option<Pose>,
        best_coverage: f64,
    },

    #[error("backtracking stalled at {position:?} after {iterations} steps")]
    BacktrackStall {
        position: Vec<f64>,
        iterations: usize,
    },

    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("scene hash mismatch: expected {expected}, found {found}")]
    SceneHashMismatch { expected: String, found: String },

    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { expected: u32, found: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn parse(path: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
