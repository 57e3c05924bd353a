use thiserror::Error;

/// Errors raised by the snow-depth models and their plumbing.
#[derive(Debug, Error)]
pub enum Error {
    /// A CSV row could not be ingested. `line` is the 1-based line number in
    /// the file (the header is line 1).
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A value or argument outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The data contain no transition a likelihood or evaluation can use.
    #[error("no usable transitions")]
    NoUsableTransitions,

    /// A dataset with fewer than two days.
    #[error("dataset has {0} day(s); no usable transitions")]
    TooShort(usize),

    /// A forecast was requested from a state whose lag history is incomplete.
    #[error("insufficient history: {0}")]
    InsufficientHistory(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain<T>(message: impl Into<String>) -> Result<T> {
    Err(Error::Domain(message.into()))
}
