use std::io;
use std::path::Path;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A parameter is outside its admissible range (bad `k`, `t`, `lambda`, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Matrix or vector shapes do not line up.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Malformed input data (CSV / PGM contents).
    #[error("data error{}: {msg}", fmt_location(.path, .line))]
    Data {
        path: Option<String>,
        line: Option<usize>,
        msg: String,
    },

    /// An underlying I/O failure, annotated with the path involved.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },

    /// A non-finite value (NaN or infinity) where a finite number is required.
    #[error("non-finite value: {0}")]
    NonFinite(String),
}

fn fmt_location(path: &Option<String>, line: &Option<usize>) -> String {
    match (path, line) {
        (Some(p), Some(l)) => format!(" in {p}:{l}"),
        (Some(p), None) => format!(" in {p}"),
        (None, Some(l)) => format!(" at line {l}"),
        (None, None) => String::new(),
    }
}

impl Error {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub(crate) fn data(path: &Path, line: Option<usize>, msg: impl Into<String>) -> Self {
        Error::Data {
            path: Some(path.display().to_string()),
            line,
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
