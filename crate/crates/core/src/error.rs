//! Error types shared by all modules.

/// Library-wide error type.
///
/// The variants mirror the failure modes of the numerical pipeline: bad
/// arguments, expression parsing, evaluation outside a function's domain,
/// loss of regularity (a singular antisymmetrized vertical Jacobian),
/// Legendre inversion failures, violated hypotheses and quadrature trouble.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("argument error: {0}")]
    Argument(String),

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("domain error: {func}({value}) is undefined{context}")]
    Domain {
        func: &'static str,
        value: f64,
        context: String,
    },

    #[error("regularity error: {what} (condition number {cond:.3e})")]
    Regularity { what: String, cond: f64 },

    #[error("non-degeneracy error: {what} (condition number {cond:.3e})")]
    NonDegenerate { what: String, cond: f64 },

    #[error("inversion error: {what} (last residual {residual:.3e})")]
    Inversion { what: String, residual: f64 },

    #[error("precondition error: {0}")]
    Precondition(String),

    #[error("integration error: {0}")]
    Integration(String),

    #[error("sampling error: {0}")]
    Sampling(String),
}

impl Error {
    pub fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    /// True for errors of numeric origin (domain, regularity, inversion,
    /// integration) as opposed to malformed input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Domain { .. }
                | Error::Regularity { .. }
                | Error::NonDegenerate { .. }
                | Error::Inversion { .. }
                | Error::Precondition(_)
                | Error::Integration(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
