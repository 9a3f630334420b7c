use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("singular system: {0}")]
    Singular(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("operator has no registered resolvent: {0}")]
    UnsupportedOperator(String),
    #[error("family synthesis failed at column {column}: {reason}")]
    SynthesisFailure { column: usize, reason: String },
    #[error("equivalent forms diverged by {gap:e} at iterate {iter}")]
    FormDivergence { iter: usize, gap: f64 },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
