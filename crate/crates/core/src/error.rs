use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid interval [{lo}, {hi}]")]
    InvalidInterval { lo: f64, hi: f64 },

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid class: {0}")]
    InvalidClass(String),

    /// Non-finite integrand value inside the support.
    #[error("integrand is not finite at x = {location}")]
    Evaluation { location: f64 },

    /// Moment sequence outside the moment space; `index` is the first failing order.
    #[error("moment sequence is infeasible at order {index}")]
    InfeasibleMoments { index: usize },

    #[error("class is infeasible: {0}")]
    InfeasibleClass(String),

    #[error(transparent)]
    Model(#[from] ModelError),

    #[error("undefined index: {0}")]
    UndefinedIndex(String),

    #[error("degenerate posterior: total likelihood mass is zero")]
    DegeneratePosterior,

    #[error("objective is not finite at feasible point {theta:?}")]
    NonFiniteObjective { theta: Vec<f64> },

    /// The requested direction is not supported by the semicontinuity of the QoI.
    #[error("{0}")]
    DirectionMismatch(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("expression error: {0}")]
    Expr(String),

    /// Malformed problem file.
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("problem file error: {0}")]
    Problem(String),
}

/// Failure of a black-box model evaluation, carrying the input row.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("model evaluation failed at {input:?}: {message}")]
pub struct ModelError {
    pub message: String,
    pub input: Vec<f64>,
}

impl ModelError {
    pub fn new(message: impl Into<String>, input: &[f64]) -> Self {
        Self {
            message: message.into(),
            input: input.to_vec(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
