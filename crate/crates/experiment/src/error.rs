use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config error: {0}")]
    Config(String),
    #[error("oracle requires labels: {unlabeled} rows have no label")]
    OracleRequiresLabels { unlabeled: usize },
    #[error("split error: {0}")]
    Split(String),
    #[error(transparent)]
    Core(#[from] al_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, ExperimentError>;
