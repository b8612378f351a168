//! Error type shared by the estimation and detection routines.

/// Errors surfaced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A precondition on an argument was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Reference window construction found no eligible cell.
    #[error("degenerate reference window: {0}")]
    DegenerateWindow(String),

    /// An iterative numeric routine failed to converge.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Input outside the stability domain of the requested routine.
    #[error("domain error: {0}")]
    Domain(String),

    /// Least-squares system is rank deficient or near singular.
    #[error("ill-conditioned system (condition estimate {cond:.3e})")]
    IllConditioned {
        /// Rough condition estimate from the factorization pivots.
        cond: f64,
    },

    /// Component or cell index outside the valid range.
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    /// I/O failure while reading or writing tensor files.
    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// Malformed tensor file.
    #[error("bad tensor file: {0}")]
    Format(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
