use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image format error: {0}")]
    Format(String),

    #[error("invalid block size {block} for a {height}x{width} image")]
    BlockSize {
        block: usize,
        height: usize,
        width: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: String, actual: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("corrupt measurement container: {0}")]
    Container(String),

    #[error("reconstruction diverged at iteration {iteration}: {reason}")]
    Diverged { iteration: usize, reason: String },

    #[error("unknown denoiser `{0}`")]
    UnknownDenoiser(String),

    #[error("denoiser failed: {0}")]
    Denoiser(String),
}

impl Error {
    pub(crate) fn dims(expected: impl ToString, actual: impl ToString) -> Self {
        Error::Dimension {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}
