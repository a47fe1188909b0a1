use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration or model document is inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// Not enough samples for the requested partition.
    #[error("size error: {0}")]
    Size(String),

    /// A non-finite value appeared in a forward pass, loss, gradient or update.
    #[error("numeric error: {0}")]
    NonFinite(String),

    /// Training gave up after exhausting the restart budget.
    #[error("training failed after {restarts} restart(s): {reason} (last finite loss {last_finite_loss:?}, epoch {epoch}, batch {batch:?})")]
    Training {
        restarts: usize,
        reason: String,
        last_finite_loss: Option<f64>,
        epoch: usize,
        batch: Option<usize>,
    },

    /// Model and dataset were produced for different scenarios.
    #[error("metadata mismatch: {0}")]
    Mismatch(String),

    #[error("unsupported format version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },

    #[error("parse error in {path}: {msg}")]
    Parse { path: PathBuf, msg: String },

    #[error("I/O error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            msg: msg.into(),
        }
    }
}
