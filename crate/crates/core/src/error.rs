use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not Hermitian (deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("invalid POVM: {0}")]
    InvalidPovm(String),
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
    #[error("scenario mismatch: {0}")]
    Scenario(String),
    #[error("invalid assemblage: {0}")]
    InvalidAssemblage(String),
    #[error("invalid settings: {0}")]
    Settings(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("zero success probability")]
    ZeroSuccess,
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
