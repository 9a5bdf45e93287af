use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure classes surfaced by the library. Each maps onto one CLI exit code.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed numerical setup, e.g. a grid that is not a power of two.
    #[error("configuration error: {0}")]
    Config(String),

    /// A model, law or contract parameter violates its invariant. `key`
    /// names the offending parameter (config key path where known).
    #[error("validation error at `{key}`: {message}")]
    Validation { key: String, message: String },

    /// Arguments outside the domain of an operation (e.g. s > T).
    #[error("domain error: {0}")]
    Domain(String),

    /// The requested route cannot handle this law/transform combination.
    #[error("capability error: {0}")]
    Capability(String),

    /// Imaginary residuals or other signs of an inconsistent computation.
    #[error("numerical consistency error: {0}")]
    Numerical(String),

    /// A function does not decay at the grid edges, so circular
    /// convolution would wrap around.
    #[error("wrap-around error: edge magnitude {edge:.3e} exceeds {tolerance:.1e}")]
    WrapAround { edge: f64, tolerance: f64 },

    /// Mass or payoff support falls outside the grid.
    #[error("coverage error: {0}")]
    Coverage(String),

    /// A series could not be truncated within its term budget.
    #[error("convergence error: {0}")]
    Convergence(String),

    /// A discrete finite-difference stencil is too coarse.
    #[error("resolution error: {0}")]
    Resolution(String),

    /// An exact enumeration exceeded its size budget.
    #[error("resource error: {0}")]
    Resource(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            key: key.into(),
            message: message.into(),
        }
    }

    /// Process exit code: 2 validation, 3 numerical consistency, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::Validation { .. }
            | Error::Domain(_)
            | Error::Capability(_) => 2,
            Error::Numerical(_)
            | Error::WrapAround { .. }
            | Error::Coverage(_)
            | Error::Convergence(_)
            | Error::Resolution(_)
            | Error::Resource(_) => 3,
            Error::Io(_) => 4,
        }
    }
}
