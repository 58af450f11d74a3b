use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid value map: {0}")]
    ValueMap(String),

    #[error("invalid board: {0}")]
    Board(String),

    #[error("invalid choice: {0}")]
    InvalidChoice(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error(
        "design matrix is rank deficient: column `{column}` is collinear with earlier columns"
    )]
    RankDeficient { column: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
