use thiserror::Error;

/// Errors raised by the allocation engine, the reasoning loop and the
/// simulation harness.
#[derive(Debug, Error)]
pub enum Error {
    /// One or more configuration fields are invalid.
    #[error("invalid configuration: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("unknown bandwidth allocation model `{0}` (expected MAM, RDM or ATCS)")]
    UnknownModel(String),

    #[error("invalid request: {0}")]
    InvalidRequest(String),

    /// The link ledger no longer matches its active LSPs. This is a bug, not
    /// an input problem.
    #[error("ledger invariant violated: {0}")]
    Ledger(String),

    #[error("problem descriptors do not share a schema: {0}")]
    SchemaMismatch(String),

    #[error("case has no before-snapshot to revise against")]
    MissingSnapshot,

    #[error("case is not pending revision")]
    NotPending,

    /// Reports cannot be placed side by side.
    #[error("reports are not comparable: {0}")]
    Comparability(String),

    #[error("malformed record at line {line}: {message}")]
    Record { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
