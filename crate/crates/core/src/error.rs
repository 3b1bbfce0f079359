use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument outside the mathematical domain of a function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A time-bin state that violates its amplitude invariants.
    #[error("invalid state: {0}")]
    InvalidState(String),

    /// An experiment description that is internally inconsistent.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A fringe scan that cannot determine the sinusoid.
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
}

pub type Result<T> = std::result::Result<T, Error>;
