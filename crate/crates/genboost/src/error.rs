//! Error type shared by every module in the crate.

use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("exact evaluation requires {states} states, cap is {cap}")]
    SizeTooLarge { states: u128, cap: u128 },

    #[error("incompatible spaces: {0}")]
    IncompatibleSpaces(String),

    #[error("mixture component {component} lost all responsibility mass")]
    DegenerateComponent { component: usize },

    #[error("importance weights degenerate: effective sample size {ess:.2} < {min_ess}")]
    DegenerateWeights { ess: f64, min_ess: f64 },

    #[error("Markov chain acceptance rate {rate:.6} below minimum {min_rate}")]
    ZeroAcceptance { rate: f64, min_rate: f64 },

    #[error("labeled dataset is empty")]
    EmptyLabeledSet,

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("bad parameters: {0}")]
    BadParams(String),

    #[error("format error at line {line}: {msg}")]
    Format { line: usize, msg: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn format(line: usize, msg: impl Into<String>) -> Self {
        Error::Format {
            line,
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
