use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Input violates a documented precondition or invariant.
    #[error("contract violation: {0}")]
    Contract(String),
    /// A Boltzmann exponent left the representable range.
    #[error("range error: {0}")]
    Range(String),
    /// A requested construction exceeds a configured size cap.
    #[error("size cap exceeded: {0}")]
    Size(String),
    /// The requested transfer is impossible by dimension counting.
    #[error("infeasible: {0}")]
    Dimension(String),
}

macro_rules! contract {
    ($($arg:tt)*) => { $crate::Error::Contract(alloc::format!($($arg)*)) };
}
pub(crate) use contract;
