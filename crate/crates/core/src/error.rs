use thiserror::Error;

use crate::iteration::IterationReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch { left: Vec<usize>, right: Vec<usize> },

    #[error("index {index:?} out of range for shape {shape:?}")]
    IndexOutOfRange { index: Vec<usize>, shape: Vec<usize> },

    #[error("dense storage of {requested} entries exceeds the cap of {cap}")]
    DenseCapExceeded { requested: String, cap: usize },

    #[error("compressed representation of {requested} values exceeds the cap of {cap}")]
    StorageCapExceeded { requested: String, cap: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A fixed-point iteration produced a non-finite iterate. The report
    /// covers every step up to and including the failing one.
    #[error("iteration diverged after {} steps", report.iterations)]
    Divergence { report: Box<IterationReport> },

    #[error("degenerate iterate: {0}")]
    DegenerateIterate(String),

    #[error("breakdown: {0}")]
    Breakdown(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("level set is empty (characteristic mass {0})")]
    EmptyLevelSet(f64),

    #[error("malformed tensor file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape_mismatch(left: &crate::Shape, right: &crate::Shape) -> Self {
        Error::ShapeMismatch {
            left: left.mode_sizes().to_vec(),
            right: right.mode_sizes().to_vec(),
        }
    }
}
