//! Differentiable numerical kernels in double precision.

mod adam;
mod dct;
mod linalg;
mod tape;
mod tensor;

pub use adam::{adam_step, AdamState};
pub use dct::dct_matrix;
pub use tape::{Tape, Var};
pub use tensor::Tensor;

/// Variance stabilizer used by every layer norm in the model.
pub const LAYER_NORM_EPS: f64 = 1e-5;
