use thiserror::Error;

use crate::model::ValidationError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numerical range error: {0}")]
    NumericalRange(String),

    #[error("integrand returned a non-finite value at node {node} (x = {x})")]
    Evaluation { node: usize, x: f64 },

    #[error("root is not bracketed: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    Bracketing { f_lo: f64, f_hi: f64 },

    #[error("solver failed: {message}; bracket trace {trace:?}")]
    Solver { message: String, trace: Vec<(f64, f64)> },

    #[error("degenerate population: {0}")]
    DegeneratePopulation(String),

    #[error("no solution: target {target} lies below the branch minimum {minimum}")]
    NoSolution { target: f64, minimum: f64 },

    #[error("ordering error: {0}")]
    Ordering(String),

    #[error(transparent)]
    Validation(#[from] ValidationError),
}
