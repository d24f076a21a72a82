//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    /// An element index lies outside the array layout.
    #[error("index out of range: {name} = {got}, valid range is 1..={max}")]
    IndexOutOfRange {
        name: &'static str,
        got: usize,
        max: usize,
    },

    /// A geometric configuration with no defined answer (e.g. a terminal
    /// coincident with an element).
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    /// A scalar argument outside its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Mismatched collection sizes or inconsistent scenario state.
    #[error("configuration error: {0}")]
    Configuration(String),

    /// Exhaustive search refused because the candidate space is too large.
    #[error("search budget exceeded: {0}")]
    BudgetExceeded(String),

    /// Scenario or calibration file rejected, with the offending line
    /// (line 0 marks file-level problems such as missing keys).
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Underlying I/O failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
