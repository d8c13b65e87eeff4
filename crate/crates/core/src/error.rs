use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("cyclic prefix of {cp_len} samples is shorter than the {required} needed by the channel")]
    InterFrameInterference { cp_len: usize, required: usize },
    #[error("refusing to enumerate {hypotheses} hypotheses (limit {limit})")]
    TooManyHypotheses { hypotheses: u128, limit: u128 },
    #[error("trial {trial} failed: {source}")]
    Trial { trial: u64, source: Box<Error> },
    #[error("internal invariant violated: {0}")]
    Internal(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
