use thiserror::Error;

/// Library-wide error type. The CLI maps variants onto process exit codes:
/// configuration and argument problems exit 2, chain death in a single-run
/// command exits 3, I/O failures exit 4.
#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("input frame is rank deficient at tolerance {tolerance:e}")]
    RankDeficient { tolerance: f64 },

    #[error("family has no scalar iid atoms: {0}")]
    NonIidFamily(String),

    #[error("chain died at step {step}")]
    ChainDied { step: usize },

    #[error("every trial chain died before completing")]
    AllChainsDied,

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("internal invariant violated: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
