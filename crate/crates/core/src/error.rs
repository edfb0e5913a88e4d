//! Crate-wide error type with a coarse category used for process exit codes.

/// Coarse failure class; the CLI maps these to exit codes (2/3/4).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Malformed input data: bad occupancy symbols, non-monotone breakpoints, …
    Schema,
    /// Structurally valid input outside an admissible domain or precondition.
    Domain,
    /// An internal invariant failed; always a bug, never a user error.
    Internal,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("profile not in the scattering domain (phi_I must be strictly increasing): {0}")]
    NotInDomainF(String),
    #[error("profile not in the contractive scattering domain: {0}")]
    NotInDomainD(String),
    #[error("density too large: {0}")]
    DensityTooLarge(String),
    #[error("density profile not in the admissible density domain: {0}")]
    NotInDensityDomain(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("solution left the admissible domain mid-integration: {0}")]
    MidIntegrationViolation(String),
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::InvalidInput(_) => ErrorCategory::Schema,
            Error::Internal(_) => ErrorCategory::Internal,
            _ => ErrorCategory::Domain,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
