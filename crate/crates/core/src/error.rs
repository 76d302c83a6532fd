use thiserror::Error;

/// Errors produced by model validation, detector evaluation, and the
/// numeric routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("class or enumeration too large: {0}")]
    BudgetExceeded(String),

    #[error("mismatched inputs: {0}")]
    Mismatch(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
}
