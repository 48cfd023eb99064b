//! Crate-wide error type. Everything fallible returns [`Result`].

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid bounding box (w={w}, h={h}, conf={conf}): {reason}")]
    InvalidBox { w: f64, h: f64, conf: f64, reason: &'static str },

    #[error("affine transform is numerically singular (|det| = {det:.3e})")]
    SingularTransform { det: f64 },

    #[error("history is empty")]
    EmptyHistory,

    #[error("history frames must be strictly increasing (frame {frame} follows {prev})")]
    NonIncreasingFrames { prev: i64, frame: i64 },

    #[error("normalized coordinate {value} outside sanity window [-2, 3]")]
    CoordinateOutOfRange { value: f64 },

    #[error("feature statistics need at least {needed} samples, got {got}")]
    NotEnoughSamples { needed: usize, got: usize },

    #[error("embedding dimension mismatch: track has {track}, detection has {detection}")]
    EmbeddingDimMismatch { track: usize, detection: usize },

    #[error("embedding has zero norm")]
    ZeroNormEmbedding,

    #[error("{detections} detections but {embeddings} embeddings at frame {frame}")]
    EmbeddingCountMismatch { frame: i64, detections: usize, embeddings: usize },

    #[error("ground truth contains no boxes")]
    EmptyGroundTruth,

    #[error("cost matrix shape mismatch: {rows}x{cols} vs {other_rows}x{other_cols}")]
    CostShapeMismatch { rows: usize, cols: usize, other_rows: usize, other_cols: usize },

    #[error("cost matrix contains a non-finite value at ({row}, {col})")]
    NonFiniteCost { row: usize, col: usize },

    #[error("negative weight {weight} for cost component {component}")]
    NegativeWeight { component: &'static str, weight: f64 },

    #[error("prediction horizon {m} exceeds model maximum {m_max}")]
    HorizonTooLong { m: usize, m_max: usize },

    #[error("loss is undefined: every target step is masked out")]
    AllStepsMasked,

    #[error("training diverged: non-finite loss at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("model file error: {0}")]
    Model(String),

    #[error("{0}")]
    Cli(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { path: path.into(), line, msg: msg.into() }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
