use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("unsupported image format: {}", .0.display())]
    UnsupportedFormat(PathBuf),

    #[error("corrupt data in {}: {reason}", path.display())]
    CorruptData { path: PathBuf, reason: String },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("point ({row}, {col}) lies outside the {height}x{width} grid")]
    OutOfBounds {
        row: usize,
        col: usize,
        height: usize,
        width: usize,
    },

    #[error("duplicate click at ({row}, {col})")]
    DuplicateClick { row: usize, col: usize },

    #[error("object mask is empty")]
    EmptyObject,

    #[error("probability at ({row}, {col}) is not finite")]
    NonFiniteProbability { row: usize, col: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("expected {expected} input planes, got {actual}")]
    PlaneCount { expected: usize, actual: usize },

    #[error("no mislabeled pixels: the current mask already equals the ground truth")]
    NoMislabeledPixels,

    #[error("evaluation curve is empty")]
    EmptyCurve,

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("scene {scene}: instance masks {first} and {second} overlap")]
    OverlappingInstances {
        scene: String,
        first: usize,
        second: usize,
    },

    #[error("scene {scene}: instance mask {index} is empty")]
    EmptyInstance { scene: String, index: usize },

    #[error("cannot move {requested} entries to validation: only {available} train entries")]
    ValCountTooLarge { requested: usize, available: usize },

    #[error("scene {scene}: {} is {actual:?} but the image is {expected:?}", path.display())]
    SceneDimensions {
        scene: String,
        path: PathBuf,
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("invalid manifest: {0}")]
    Manifest(String),

    #[error("json error in {}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("invalid model file: {0}")]
    ModelFormat(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path)
        } else {
            Error::Io { path, source }
        }
    }
}
