use thiserror::Error;

use crate::system::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("system fails validation: {}", format_violations(.0))]
    InvalidSystem(Vec<Violation>),

    #[error("{0}")]
    Capacity(String),

    #[error("integration unstable at t = {time}: {reason}; try a smaller dt")]
    IntegrationInstability { time: f64, reason: String },

    #[error("no transition in range [{low}, {high}]: both endpoints classify as {class}")]
    NoTransition { low: f64, high: f64, class: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
