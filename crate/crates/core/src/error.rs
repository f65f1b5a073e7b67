use std::fmt;
use std::io;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug)]
pub enum Error {
    Io(io::Error),
    /// Input row could not be parsed. `row` is 1-based and counts the header.
    Parse { row: usize, message: String },
    /// Not enough data for the requested operation.
    InsufficientData { needed: usize, got: usize },
    /// A scale, threshold or confidence would divide by zero.
    Degenerate(String),
    InvalidInput(String),
    DimensionMismatch { expected: usize, got: usize },
    /// A detector produced a NaN or infinite score.
    NonFinite { index: usize },
    Plan(String),
    Config(String),
    /// Persisted blob has the wrong magic or version.
    Format(String),
    /// Pipeline stage failure, carrying the stage name.
    Stage { stage: String, source: Box<Error> },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Io(e) => write!(f, "io error: {e}"),
            Error::Parse { row, message } => write!(f, "parse error at row {row}: {message}"),
            Error::InsufficientData { needed, got } => {
                write!(f, "insufficient data: need at least {needed}, got {got}")
            }
            Error::Degenerate(m) => write!(f, "degenerate input: {m}"),
            Error::InvalidInput(m) => write!(f, "invalid input: {m}"),
            Error::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            Error::NonFinite { index } => write!(f, "non-finite score at window {index}"),
            Error::Plan(m) => write!(f, "injection plan error: {m}"),
            Error::Config(m) => write!(f, "config error: {m}"),
            Error::Format(m) => write!(f, "format error: {m}"),
            Error::Stage { stage, source } => write!(f, "stage `{stage}` failed: {source}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            Error::Stage { source, .. } => Some(source.as_ref()),
            _ => None,
        }
    }
}

impl From<io::Error> for Error {
    fn from(e: io::Error) -> Self {
        Error::Io(e)
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        let row = e.position().map(|p| p.line() as usize).unwrap_or(0);
        Error::Parse { row, message: e.to_string() }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}
