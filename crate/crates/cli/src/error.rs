use std::path::PathBuf;

use clicksel::Error as CoreError;

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const OTHER: u8 = 1;
    /// Malformed command line (reported by the argument parser).
    pub const USAGE: u8 = 2;
    /// A file could not be found, read or written.
    pub const IO: u8 = 3;
    /// An input file exists but its contents are unusable.
    pub const INVALID_DATA: u8 = 4;
    /// A flag or click value is out of range.
    pub const INVALID_PARAM: u8 = 5;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid argument: {0}")]
    Param(String),

    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) => core_exit_code(e),
            CliError::Io { .. } => exit::IO,
            CliError::Param(_) => exit::INVALID_PARAM,
            CliError::Other(_) => exit::OTHER,
        }
    }
}

fn core_exit_code(e: &CoreError) -> u8 {
    match e {
        CoreError::MissingFile(_) | CoreError::Io { .. } => exit::IO,
        CoreError::UnsupportedFormat(_)
        | CoreError::CorruptData { .. }
        | CoreError::DimensionMismatch { .. }
        | CoreError::SceneDimensions { .. }
        | CoreError::EmptyObject
        | CoreError::NonFiniteProbability { .. }
        | CoreError::PlaneCount { .. }
        | CoreError::EmptyDataset
        | CoreError::OverlappingInstances { .. }
        | CoreError::EmptyInstance { .. }
        | CoreError::Manifest(_)
        | CoreError::Json { .. }
        | CoreError::ModelFormat(_) => exit::INVALID_DATA,
        CoreError::InvalidParameter(_)
        | CoreError::OutOfBounds { .. }
        | CoreError::DuplicateClick { .. }
        | CoreError::ValCountTooLarge { .. } => exit::INVALID_PARAM,
        _ => exit::OTHER,
    }
}

pub type CliResult<T> = Result<T, CliError>;
