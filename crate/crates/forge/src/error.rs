use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("duplicate symbol `{0}`")]
    DuplicateSymbol(String),
    #[error("symbol `{0}` has arity 0")]
    ZeroArity(String),
    #[error("duplicate element label `{0}`")]
    DuplicateLabel(String),
    #[error("unknown element `{0}`")]
    UnknownElement(String),
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("tuple of length {len} for symbol `{symbol}` of arity {arity}")]
    TupleArity {
        symbol: String,
        len: usize,
        arity: usize,
    },
    #[error("element index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("signature mismatch: {0}")]
    SignatureMismatch(String),
    #[error("metric: {0}")]
    Metric(String),
    #[error("shared part disagrees: {0}")]
    SharedMismatch(String),
    #[error("partial map already violates the {kind} conditions: {violation}")]
    PartialViolates { kind: String, violation: String },
    #[error("amalgam: {0}")]
    Amalgam(String),
    #[error("not a member of {class}: {reason}")]
    NotInClass { class: String, reason: String },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("arity: {0}")]
    Arity(String),
    #[error("no factorization at this truncation: {0}")]
    NoFactorization(String),
    #[error("stage aborted: {0}")]
    StageAbort(String),
    #[error("unknown age `{0}`")]
    UnknownAge(String),
    #[error("json at {path}: {msg}")]
    Json { path: String, msg: String },
}

impl Error {
    pub(crate) fn json(path: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Json {
            path: path.into(),
            msg: msg.into(),
        }
    }

    pub(crate) fn not_in(class: &str, reason: impl Into<String>) -> Self {
        Error::NotInClass {
            class: class.to_string(),
            reason: reason.into(),
        }
    }
}
