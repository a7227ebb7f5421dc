use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid generator parameters: {0}")]
    Params(String),
    #[error("invalid sweep: {0}")]
    Sweep(String),
    #[error(transparent)]
    Market(#[from] fogmarket_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, HarnessError>;
