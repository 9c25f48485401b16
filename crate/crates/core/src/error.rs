use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("division by zero in GF(2^8)")]
    DivisionByZero,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("reconfiguration infeasible: {reason}")]
    Infeasible { reason: String, violations: Vec<String> },

    #[error("trace line {line}: {message}")]
    TraceParse { line: usize, message: String },
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn infeasible(reason: impl Into<String>) -> Self {
        Error::Infeasible { reason: reason.into(), violations: Vec::new() }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
