use thiserror::Error;

/// Process exit codes.
pub mod exit {
    /// Every checked bound holds.
    pub const PASS: i32 = 0;
    /// A checked bound is violated.
    pub const VIOLATION: i32 = 1;
    /// Bad usage, unreadable input or a failed precondition.
    pub const PRECONDITION: i32 = 2;
    /// The library reported an internal inconsistency or a failed LP.
    pub const INTERNAL: i32 = 3;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("malformed input: {0}")]
    Format(String),

    #[error("usage: {0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] boxlab::Error),

    #[error("writing report: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Core(boxlab::Error::Internal(_) | boxlab::Error::Lp(_)) => exit::INTERNAL,
            _ => exit::PRECONDITION,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
