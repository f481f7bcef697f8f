use alloc::string::String;

/// Errors shared by every numerical routine in the crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),
    /// The requested accuracy was not reached; carries the best estimate.
    #[error("accuracy goal not met: estimate {estimate:e}, error bound {bound:e}")]
    Accuracy { estimate: f64, bound: f64 },
    /// A spatial domain or frequency cutoff is too small for the tolerance.
    #[error("truncation error: {0}")]
    Truncation(String),
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    /// A series or fixed-point construction does not converge.
    #[error("divergence: {0}")]
    Divergence(String),
    /// A statistical estimate cannot be formed from the data.
    #[error("estimation error: {0}")]
    Estimation(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
