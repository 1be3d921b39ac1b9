use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point {x} lies outside [0, 1]")]
    Domain { x: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid branch layout: {0}")]
    InvalidBranches(String),

    #[error("no convergence after {iterations} iterations (last increment {increment:e}): {context}")]
    NonConvergence {
        context: String,
        iterations: usize,
        increment: f64,
    },

    #[error("orbit did not return within {cap} steps")]
    Censored { cap: u64 },

    #[error("mesh has no cell boundary at {point}")]
    MeshMisaligned { point: f64 },

    #[error("fit window [{lo}, {hi}] selects fewer than two points")]
    EmptyWindow { lo: usize, hi: usize },

    #[error("non-positive value {value} at index {index} inside the fit window")]
    NonPositiveValues { index: usize, value: f64 },

    #[error("target box leaves [1/2, 1]: {0}")]
    BoxOverflow(String),
}

pub type Result<T> = std::result::Result<T, Error>;
