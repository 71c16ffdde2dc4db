use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("rank-deficient regression: {0}")]
    RankDeficient(String),

    #[error("inconsistent problem construction: {0}")]
    Construction(String),

    #[error("command-set library is empty")]
    EmptyLibrary,

    #[error("invalid command set: {0}")]
    InvalidSet(String),

    #[error("no path: {0}")]
    NoPath(String),

    #[error("start cell is not traversable: {0}")]
    BlockedStart(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("unknown scenario `{name}` (available: {available})")]
    UnknownScenario { name: String, available: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
