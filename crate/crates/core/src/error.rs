use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("undefined consistency rate: photon flux must be positive")]
    UndefinedConsistency,
    #[error("branch ambiguity: eigenvalues {0} and {1} cannot be separated")]
    BranchAmbiguity(String, String),
    #[error("degenerate stationary state: {0}")]
    Degenerate(String),
    #[error("capacity exceeded: {what} = {got} > {max}")]
    Capacity { what: &'static str, got: usize, max: usize },
    #[error("convergence failure: {0}")]
    Convergence(String),
    #[error("overflow guard: exponent {0} out of range")]
    Overflow(f64),
    #[error("square-root domain breach: {0}")]
    Domain(String),
    #[error("step-size underflow at N_z = {0}")]
    Stiffness(f64),
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
