use thiserror::Error;

use crate::formula::Var;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("parse error at {line}:{column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("formula mixes linear and nonlinear atoms where a linear system is required")]
    MixedMode,
    #[error("no value assigned to variable {0:?}")]
    MissingAssignment(Var),
    #[error("zero polynomial has no content")]
    ZeroPolynomial,
    #[error("polynomial does not mention the main variable {0:?}")]
    DegreeZero(Var),
    #[error("degree in {0:?} is below 2")]
    DegreeTooLow(Var),
    #[error("inexact polynomial division")]
    InexactDivision,
    #[error("graph is disconnected")]
    DisconnectedGraph,
    #[error("polynomial set is empty")]
    EmptySet,
    #[error("invalid tree decomposition: {0}")]
    InvalidDecomposition(String),
    #[error("PACE format error on line {line}: {message}")]
    Pace { line: usize, message: String },
    #[error("declared bag size {declared} does not match largest bag {actual}")]
    DeclaredWidthMismatch { declared: usize, actual: usize },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("intermediate system exceeded the cap of {cap} atoms")]
    CapExceeded { cap: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
