use std::f64::consts::PI;

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Orthonormal DCT-II basis as a `T×T` matrix whose row `k` is the `k`-th
/// cosine basis vector. Row 0 is the constant `1/√T`.
///
/// For a trajectory stored as a row vector `p`, the coefficients are
/// `p · Mᵀ` and the inverse is `c · M`.
pub fn dct_matrix(t: usize) -> Result<Tensor> {
    if t == 0 {
        return Err(Error::Parameter("dct_matrix needs T ≥ 1".into()));
    }
    let tf = t as f64;
    let mut data = vec![0.0; t * t];
    for k in 0..t {
        let scale = if k == 0 {
            (1.0 / tf).sqrt()
        } else {
            (2.0 / tf).sqrt()
        };
        for n in 0..t {
            data[k * t + n] = scale * (PI * (2 * n + 1) as f64 * k as f64 / (2.0 * tf)).cos();
        }
    }
    Tensor::new(vec![t, t], data)
}
