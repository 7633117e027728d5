use thiserror::Error;

/// Errors raised by the numerical layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("argument {value} outside the domain of {what}")]
    Domain { what: &'static str, value: f64 },
    #[error("quadrature did not converge on [{a}, {b}] (estimated error {err:e})")]
    Quadrature { a: f64, b: f64, err: f64 },
    #[error("ODE integration failed at x = {x}: {reason}")]
    Integration { x: f64, reason: String },
    #[error("no sign change of g(inf) found in [{lo}, {hi}]")]
    Bracketing { lo: f64, hi: f64 },
    #[error("step budget of {budget} exhausted (sample {index})")]
    StepBudget { budget: u64, index: u64 },
    #[error("unknown potential family `{0}`")]
    UnknownFamily(String),
    #[error("{0}")]
    Check(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
