use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("unsupported objective count {0} (only 2 objectives are supported here)")]
    UnsupportedDimension(usize),

    #[error("degenerate sampling domain: bound[{axis}] = {high} <= reference[{axis}] = {low}")]
    DegenerateDomain { axis: usize, low: f64, high: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("archive is empty")]
    EmptyArchive,

    #[error("insufficient data: need {needed} samples, buffer holds {available}")]
    InsufficientData { needed: usize, available: usize },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Dimension { expected, got });
    }
    Ok(())
}
