use thiserror::Error;

use crate::mild::ContractionReport;
use crate::trajectory::Trajectory;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("normalization is singular: min |eta + d| = {min_norm:.3e} < {bound}")]
    SingularNormalization { min_norm: f64, bound: f64 },

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("non-finite coefficient detected at t = {time}")]
    Blowup { time: f64, partial: Box<Trajectory> },

    #[error("Picard iteration is not contracting ({} iterates)", report.iterate_norms.len())]
    NonContraction { report: Box<ContractionReport> },

    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("snapshot format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
