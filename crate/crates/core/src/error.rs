use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the detection pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("zero valid points")]
    ZeroValidPoints,
    #[error("invalid cloud: {0}")]
    InvalidCloud(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("too few neighbors: found {found}, need {required}")]
    TooFewNeighbors { found: usize, required: usize },
    #[error("degenerate scatter: neighborhood is collinear")]
    DegenerateScatter,
    #[error("degenerate closing region")]
    DegenerateRegion,
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("empty render: no ray hit the mesh")]
    EmptyRender,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("{}: bad model file: {message}", path.display())]
    ModelFormat { path: PathBuf, message: String },
    #[error("training diverged: non-finite loss at iteration {0}")]
    Divergence(usize),
    #[error("empty split: {0}")]
    EmptySplit(String),
    #[error("no positive labels")]
    NoPositives,
    #[error("too few groups to split: {0}")]
    TooFewGroups(usize),
    #[error("no grasps left after width pruning")]
    EmptySelection,
    #[error("config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// File the error refers to, if any.
    pub fn path(&self) -> Option<&std::path::Path> {
        match self {
            Error::Io { path, .. } | Error::Parse { path, .. } | Error::ModelFormat { path, .. } => Some(path),
            _ => None,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }
}
