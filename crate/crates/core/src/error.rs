use thiserror::Error;

/// Errors raised anywhere in the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("type error: {0}")]
    Type(String),
    #[error("arithmetic overflow in {0}")]
    Overflow(String),
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid modification: {0}")]
    Modification(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("compile error: {0}")]
    Compile(String),
    #[error("variable `{0}` has no derivable bound")]
    Unbounded(String),
    #[error("domain too large for enumeration: {0} combinations")]
    DomainOverflow(u128),
    #[error("data error: {0}")]
    Data(String),
    #[error("invalid workload spec: {0}")]
    Workload(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn schema(msg: impl Into<String>) -> Self {
        Error::Schema(msg.into())
    }

    pub(crate) fn ty(msg: impl Into<String>) -> Self {
        Error::Type(msg.into())
    }
}
