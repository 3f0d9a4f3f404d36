use thiserror::Error;

use crate::Backend;

/// Errors produced by the solver library.
#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("angle {theta} outside the open domain ({lo}, {hi})")]
    Domain { theta: f64, lo: f64, hi: f64 },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("point {x} outside interpolation interval [{a1}, {a2}]")]
    Extrapolation { x: f64, a1: f64, a2: f64 },

    #[error("linear solve failed (n = {n}, dt = {dt:e}, interval = [{a1}, {a2}]): {reason}")]
    Numerical {
        n: usize,
        dt: f64,
        a1: f64,
        a2: f64,
        reason: String,
    },

    #[error("frontier detection failed: {0}")]
    FrontierDetection(String),

    #[error("mesh failure: {0}")]
    Mesh(String),

    #[error("{backend:?} solve failed at step {step} (t = {t:.6}, interval = [{a1:.6}, {a2:.6}]): {source}")]
    Step {
        step: usize,
        t: f64,
        a1: f64,
        a2: f64,
        backend: Backend,
        #[source]
        source: Box<SolverError>,
    },

    #[error("invalid input: {0}")]
    Input(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, SolverError>;
