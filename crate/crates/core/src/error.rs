use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid map: {0}")]
    InvalidMap(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("heading must be a multiple of 45 degrees, got {0}")]
    InvalidHeading(i64),

    #[error("dense joint belief needs {needed} entries, cap is {cap}")]
    BeliefTooLarge { needed: u128, cap: usize },

    #[error("no metrics for an empty result set")]
    EmptyResults,

    #[error("unknown agent '{0}'")]
    UnknownAgent(String),

    #[error("agent failed: {0}")]
    Agent(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
