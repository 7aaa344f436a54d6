use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter violated its documented domain.
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    /// The single-valued sliding law was asked to evaluate the set-valued
    /// sticking case; the caller has to go through the prox residual instead.
    #[error("relative velocity is zero: friction force is set-valued here")]
    SetValued,

    /// A matrix that must be invertible was not.
    #[error("singular matrix in {0}")]
    Singular(&'static str),

    /// An iterative estimator gave up.
    #[error("{estimator} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        estimator: &'static str,
        iterations: usize,
        residual: f64,
    },

    /// Integration produced NaN or infinite values.
    #[error("state became non-finite at t = {t:e}")]
    NonFinite { t: f64 },

    /// The impulsive torque cannot move the pendulum at this configuration.
    #[error("singular configuration: |cos(theta2)| = {cos_theta2:e} is below the threshold")]
    SingularConfiguration { cos_theta2: f64 },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
