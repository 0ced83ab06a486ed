use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: expected M={expected} D={expected_d}, found M={found} D={found_d}")]
    GridMismatch {
        expected: usize,
        expected_d: f64,
        found: usize,
        found_d: f64,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("time grid: {0}")]
    TimeGrid(String),

    #[error("trajectory too large for full-field storage (M={m}, K={steps}); record probes instead")]
    TrajectoryTooLarge { m: usize, steps: usize },

    #[error("trajectory does not carry {0} samples")]
    MissingSamples(&'static str),

    #[error("sensor mask mismatch: {0}")]
    MaskMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("reconstruction diverged at iteration {iter}: J0 = {value:e} exceeds 10x initial {initial:e}; reduce the step size")]
    Diverged { iter: usize, value: f64, initial: f64 },

    #[error("boundary point ({0}, {1}) lies outside the interpolation grid")]
    OutsideGrid(f64, f64),

    #[error("infeasible sensor arcs: {0}")]
    Infeasible(String),

    #[error("config {path}: {msg}")]
    Config { path: String, msg: String },

    #[error("format error in {path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
