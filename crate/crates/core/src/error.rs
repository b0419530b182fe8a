use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("degenerate function: {0}")]
    Degenerate(String),
    #[error("superlevel set is empty: beta {beta} is not below the sup norm {sup}")]
    EmptySet { beta: f64, sup: f64 },
    #[error("integral does not converge: {0}")]
    NonIntegrable(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("certificate quality: {0}")]
    Certificate(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
