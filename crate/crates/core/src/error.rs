use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid exponent: {0}")]
    InvalidExponent(String),
    #[error("degenerate domain: {0}")]
    DegenerateDomain(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("envelope: {0}")]
    Envelope(String),
    #[error("level set: {0}")]
    LevelSet(String),
    #[error("config: {0}")]
    Config(String),
    #[error("not converged: {0}")]
    NotConverged(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag, used in CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidExponent(_) => "invalid_exponent",
            Error::DegenerateDomain(_) => "degenerate_domain",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Envelope(_) => "envelope",
            Error::LevelSet(_) => "level_set",
            Error::Config(_) => "config",
            Error::NotConverged(_) => "not_converged",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
