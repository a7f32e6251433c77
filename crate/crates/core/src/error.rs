use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("group handle is stale or was never live")]
    StaleGroup,
    #[error("cannot merge a group with itself")]
    SelfMerge,
    #[error("partition invariant violated: {0}")]
    Invariant(String),
    #[error("history length {got} does not match strategy memory {expected}")]
    HistoryLength { expected: usize, got: usize },
    #[error("group size {0} is too large for exhaustive enumeration")]
    TooLargeForOracle(usize),
    #[error("series contains no trades")]
    NoTrades,
    #[error("too few tail points: {got} (need at least {need})")]
    TooFewTailPoints { got: usize, need: usize },
    #[error("degenerate tail sample: all points equal r_min")]
    DegenerateTail,
    #[error("malformed series data: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
