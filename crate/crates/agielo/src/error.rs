use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Error taxonomy for the rating toolkit.
///
/// The variants map one-to-one onto the CLI exit codes: [`Error::Argument`]
/// is a usage problem (exit 1), [`Error::Format`] and [`Error::Io`] are data
/// problems (exit 2), and [`Error::Domain`] is a numeric problem (exit 3).
#[derive(Debug, Error)]
pub enum Error {
    /// A numeric input left the mathematical domain of an operation
    /// (non-finite rating, score outside `[0, 1]`, negative deviation, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A structurally invalid argument: empty collections, mismatched
    /// lengths, unknown identifiers, bad configuration keys.
    #[error("argument error: {0}")]
    Argument(String),

    /// Malformed input data: CSV schema violations, unparsable documents.
    #[error("format error: {0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}
