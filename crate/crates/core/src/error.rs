use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("degenerate ground space: spectral gap {gap:e} is below {threshold:e}")]
    DegenerateGround { gap: f64, threshold: f64 },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("position {index} out of range (valid: {valid})")]
    Range { index: usize, valid: String },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("integrity violation: {0}")]
    Integrity(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }
}
