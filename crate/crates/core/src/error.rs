use thiserror::Error;

use crate::sdp::SolverStatus;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite data: {0}")]
    NonFinite(String),
    #[error("matrix is not Hermitian: {0}")]
    NotHermitian(String),
    #[error("matrix is not positive semidefinite: {0}")]
    NotPsd(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("operation requires an optimal solve, got status {0:?}")]
    NotOptimal(SolverStatus),
    #[error("rank-one ratio undefined: {0}")]
    UndefinedRatio(String),
    #[error("scenario infeasible: {0}")]
    ScenarioInfeasible(String),
    #[error("SDPA parse error on line {line}: {msg}")]
    SdpaParse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
