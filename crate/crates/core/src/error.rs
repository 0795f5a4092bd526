use thiserror::Error;

use crate::mdp::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model ({} violation(s)); first: {}", .0.len(), .0.first().map(|v| v.to_string()).unwrap_or_default())]
    InvalidModel(Vec<Violation>),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("value iteration did not converge for alpha = {alpha} after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        alpha: f64,
        iterations: usize,
        residual: f64,
    },

    #[error("linear program ended with status {0}")]
    LpStatus(String),

    #[error("noise density at (x = {x}, a = {a}) integrates to {mass} (deficit {deficit:e})")]
    MassDeficit { x: f64, a: f64, mass: f64, deficit: f64 },

    #[error("density evaluation failed at (x = {x}, a = {a}, y = {y})")]
    DensityEvaluation { x: f64, a: f64, y: f64 },

    #[error("model file: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
