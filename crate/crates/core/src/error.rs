use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[non_exhaustive]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// An internal consistency check failed, e.g. a budget whose noise scale
    /// does not invert back to its declared privacy loss.
    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("bound undefined: {0}")]
    UndefinedBound(String),

    #[error("prior rejection limit of {0} redraws exceeded")]
    RedrawLimit(u32),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
