use thiserror::Error;

use crate::solver::Spectrum;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("rotation vector magnitude {magnitude} exceeds {bound}")]
    OutOfRange { magnitude: f64, bound: f64 },
    #[error("sector ({alpha}, {beta}) has half-integer difference; its amplitude is identically zero")]
    HalfInteger { alpha: String, beta: String },
    #[error("point lies on a coincidence hyperplane ({0})")]
    Coincidence(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("internal consistency check failed: {0}")]
    Consistency(String),
    #[error("solver did not converge after {iterations} iterations ({converged} of {requested} levels)")]
    NonConvergence {
        iterations: usize,
        converged: usize,
        requested: usize,
        partial: Box<Spectrum>,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Invalid(msg.into()))
}
