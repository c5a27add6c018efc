use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid degree: {0}")]
    InvalidDegree(String),
    #[error("degenerate frame (rank deficient)")]
    DegenerateFrame,
    #[error("no contraction vector separates the forms (inputs are dependent)")]
    NoSuchVector,
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid projective point (0,0)")]
    InvalidPoint,
    #[error("undersampled path between t = {t0} and t = {t1}")]
    Undersampled { t0: f64, t1: f64 },
    #[error("path leaves the MA space on the {side} side near x = {x}, lambda = {lambda}")]
    LeftMaSpace { side: String, x: f64, lambda: f64 },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("degenerate problem: {0}")]
    Degenerate(String),
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("not a Turing setup: {0}")]
    NotTuring(String),
}

pub type Result<T> = std::result::Result<T, Error>;
