use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GateError {
    /// A parameter lies outside its allowed domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// Kick times are not strictly increasing, or delays violate a required ordering.
    #[error("ordering error: {0}")]
    Ordering(String),
    /// A structural invariant of a value does not hold.
    #[error("invariant violated: {0}")]
    Invariant(String),
    /// No evaluation of an optimization produced a usable point.
    #[error("infeasible: {0}")]
    Infeasible(String),
}

pub type Result<T> = std::result::Result<T, GateError>;
