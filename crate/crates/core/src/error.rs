use serde::Serialize;
use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("input error: {0}")]
    Input(String),
    #[error("numerical degeneracy: {0}")]
    Degenerate(String),
    #[error("solver did not converge: {what} after {iterations} iterations")]
    Solver { what: String, iterations: usize },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("path continuation failed after {depth} halvings near t={t}")]
    Continuation { depth: usize, t: f64 },
    #[error("point outside domain: {0}")]
    Domain(String),
    #[error("classification indeterminate within budget")]
    Indeterminate(Box<Diagnostics>),
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    /// Short stable tag for the variant.
    pub fn tag(&self) -> &'static str {
        match self {
            Error::Input(_) => "input",
            Error::Degenerate(_) => "degenerate",
            Error::Solver { .. } => "solver",
            Error::Precondition(_) => "precondition",
            Error::Continuation { .. } => "continuation",
            Error::Domain(_) => "domain",
            Error::Indeterminate(_) => "indeterminate",
            Error::Internal(_) => "internal",
        }
    }
}

/// Evidence collected by a classifier that could not reach a verdict.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Diagnostics {
    pub best_future_margin: f64,
    pub best_past_margin: f64,
    pub drift: f64,
    pub max_window: f64,
    pub seed_verdicts: Vec<String>,
    pub notes: Vec<String>,
}

pub type Result<T> = std::result::Result<T, Error>;
