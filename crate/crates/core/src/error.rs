use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid coefficients: {0}")]
    InvalidCoefficients(String),
    #[error("grid error: {0}")]
    Grid(String),
    #[error("parity not set for field `{0}`")]
    ParityUnset(String),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("integrator failure: {0}")]
    Integrator(String),
    #[error("newton iteration failed to converge: {0}")]
    NewtonFailed(String),
    #[error("fit failed: {0}")]
    Fit(String),
    #[error("solver instability: {0}")]
    Unstable(String),
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
