use alloc::string::String;

/// Errors raised by problem construction, optimizer validation and theory
/// preconditions.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("unknown kind `{0}`")]
    UnknownKind(String),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("batch size {requested} exceeds the {available} available samples")]
    BatchTooLarge { requested: usize, available: usize },
    #[error("malformed data: {0}")]
    MalformedData(String),
    #[error("missing metadata: {0}")]
    MissingMetadata(&'static str),
    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
