use thiserror::Error;

/// Errors produced by the cell constructions, solvers and verification harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("parameter window violated: {0}")]
    Window(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("no positive solution: {0}")]
    NoSolution(String),

    #[error("singular point: {0}")]
    SingularPoint(String),

    #[error("linear system could not be solved: {0}")]
    SingularSystem(String),

    #[error("contraction failed: {0}")]
    Contraction(String),

    #[error("assembly failed: {0}")]
    Assembly(String),

    #[error("truncation did not stabilise: {0}")]
    Truncation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("stage failed: {0}")]
    Stage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
