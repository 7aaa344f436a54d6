use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("scenario syntax: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] stickslip_core::Error),
}

impl SimError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        SimError::Invalid(msg.into())
    }

    /// Whether the error stems from bad input rather than from running it.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            SimError::Syntax(_) | SimError::Invalid(_) | SimError::Read { .. } | SimError::Core(stickslip_core::Error::Parameter { .. })
        )
    }
}

pub type Result<T> = std::result::Result<T, SimError>;
