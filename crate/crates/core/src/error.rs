use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("codebook/link parameter mismatch: {0}")]
    ParamMismatch(String),

    #[error("symbol index {index} out of range for M = {m}")]
    IndexOutOfRange { index: usize, m: usize },

    #[error("observation carries no channel state information")]
    MissingCsi,

    #[error("no parity-check matrix of rank {target} after {tried} seeds starting at {start}")]
    RankSearchExhausted { target: usize, tried: u64, start: u64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
