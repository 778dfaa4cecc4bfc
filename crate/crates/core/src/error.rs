use thiserror::Error;

/// Library-wide error type.
///
/// The split between variants mirrors how callers are expected to react:
/// `Domain`, `Precondition`, and `InvalidInput` mean the request itself was
/// outside the supported parameter region, while `QuadratureFailure`,
/// `StepControlFailure`, and `IllConditioned` mean a numerical routine gave
/// up on an otherwise legal request.
#[derive(Debug, Error)]
pub enum Error {
    /// Argument outside the mathematical domain of the routine.
    #[error("domain error: {0}")]
    Domain(String),

    /// A structural precondition on the inputs was violated.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Malformed or inconsistent input data (files, sample sets, matrices).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Adaptive quadrature hit its subdivision limit before the tolerance.
    #[error("quadrature failure: {0}")]
    QuadratureFailure(String),

    /// Adaptive ODE stepping failed (step underflow or step budget).
    #[error("step control failure: {0}")]
    StepControlFailure(String),

    /// A linear solve or extraction was too ill-conditioned to trust.
    #[error("ill-conditioned: {0}")]
    IllConditioned(String),
}

impl Error {
    /// True for errors that describe bad requests rather than numerical
    /// breakdown. CLI layers map these to a distinct exit code.
    pub fn is_precondition(&self) -> bool {
        matches!(
            self,
            Error::Domain(_) | Error::Precondition(_) | Error::InvalidInput(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
