use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Tensor(#[from] lane_tensor::TensorError),
    #[error("unknown source token `{0}`")]
    UnknownWord(String),
    #[error("unknown destination token `{0}`")]
    UnknownAction(String),
    #[error("memory protocol: {0}")]
    Protocol(String),
    #[error("memory pool exhausted ({0} slots)")]
    Capacity(usize),
    #[error("span [{start}, {end}] out of range for length {len}")]
    Span { start: usize, end: usize, len: usize },
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("config: {0}")]
    Config(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Data(#[from] lane_scan::DataError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
