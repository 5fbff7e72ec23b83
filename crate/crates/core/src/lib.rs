pub mod algebra;
pub mod cli;
pub mod cp;
pub mod dense;
pub mod error;
pub mod generate;
pub mod io;
pub mod iteration;
pub mod postproc;
mod linalg;
pub mod shape;
pub mod tt;

pub use algebra::{AlgebraElement, TruncationPolicy, Truncated};
pub use cp::CpTensor;
pub use dense::DenseTensor;
pub use error::{Error, Result};
pub use shape::{MultiIndex, Shape};
pub use tt::{TtCore, TtTensor};
