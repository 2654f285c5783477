use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the detector, the harness, or the CLI.
#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {}", .0.display())]
    NotFound(PathBuf),

    #[error("decode failure in {}: {message}", path.display())]
    Decode { path: PathBuf, message: String },

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("encode failure writing {}: {message}", path.display())]
    Encode { path: PathBuf, message: String },

    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("invalid frame: {0}")]
    InvalidFrame(String),

    #[error("pixel ({x}, {y}) outside {width}x{height} frame")]
    OutOfBounds {
        x: usize,
        y: usize,
        width: usize,
        height: usize,
    },

    #[error("non-finite input current {0}")]
    NonFiniteCurrent(f64),

    #[error("illegal ground-truth label {value} at ({x}, {y})")]
    IllegalLabel { value: u8, x: usize, y: usize },

    #[error("kernel {kernel:?} does not fit a {image:?} image")]
    KernelTooLarge {
        kernel: (usize, usize),
        image: (usize, usize),
    },

    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    InvalidConfig(Vec<String>),

    #[error("cannot parse {} at line {line}, column {column}: {message}", path.display())]
    ConfigParse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unsupported source: {0}")]
    UnsupportedSource(String),

    #[error("no valid videos found under {}", .0.display())]
    EmptyDataset(PathBuf),

    #[error("cannot rank an empty method list")]
    NoMethods,

    #[error("method `{method}` missing from category `{category}`")]
    MissingMethod { method: String, category: String },

    #[error("fixture {}: {message}", path.display())]
    Fixture { path: PathBuf, message: String },

    #[error("report serialisation failed: {0}")]
    Report(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
