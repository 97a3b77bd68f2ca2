use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Moment estimates for bias-corrected Adam.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    /// Zeroed moments for the given parameter shapes with betas (0.9, 0.999)
    /// and eps 1e-8.
    pub fn new(params: &[Tensor]) -> Self {
        Self::with_hyper(params, 0.9, 0.999, 1e-8)
    }

    pub fn with_hyper(params: &[Tensor], beta1: f64, beta2: f64, eps: f64) -> Self {
        let zeros = || params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        Self {
            step: 0,
            m: zeros(),
            v: zeros(),
            beta1,
            beta2,
            eps,
        }
    }
}

/// One Adam update of `params` in place.
pub fn adam_step(
    params: &mut [Tensor],
    grads: &[Tensor],
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::Contract(format!(
            "adam_step: {} params, {} grads, {} moment slots",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.shape() != g.shape() || p.shape() != state.m[i].shape() {
            return Err(Error::Contract(format!(
                "adam_step: slot {i} param {:?}, grad {:?}, moment {:?}",
                p.shape(),
                g.shape(),
                state.m[i].shape()
            )));
        }
    }
    state.step += 1;
    let (b1, b2) = (state.beta1, state.beta2);
    let bc1 = 1.0 - b1.powi(state.step as i32);
    let bc2 = 1.0 - b2.powi(state.step as i32);
    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        let pd = p.data_mut();
        let md = m.data_mut();
        let vd = v.data_mut();
        for (j, &gj) in g.data().iter().enumerate() {
            md[j] = b1 * md[j] + (1.0 - b1) * gj;
            vd[j] = b2 * vd[j] + (1.0 - b2) * gj * gj;
            let mhat = md[j] / bc1;
            let vhat = vd[j] / bc2;
            pd[j] -= lr * mhat / (vhat.sqrt() + state.eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = vec![Tensor::from_fn(&[2, 3], |i| i as f64)];
        let before = p.clone();
        let g = vec![Tensor::zeros(&[2, 3])];
        let mut s = AdamState::new(&p);
        adam_step(&mut p, &g, &mut s, 0.005).unwrap();
        assert_eq!(p, before);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn single_scalar_step() {
        let mut p = vec![Tensor::scalar(1.0)];
        let g = vec![Tensor::scalar(1.0)];
        let mut s = AdamState::new(&p);
        adam_step(&mut p, &g, &mut s, 0.005).unwrap();
        // m̂ = v̂ = 1 after bias correction.
        let expected = 1.0 - 0.005 * (1.0 / (1.0 + 1e-8));
        assert!((p[0].data()[0] - expected).abs() < 1e-15);
        assert!((p[0].data()[0] - 0.995).abs() < 1e-9);
    }

    #[test]
    fn descends_quadratic() {
        let mut p = vec![Tensor::scalar(2.0)];
        let mut s = AdamState::new(&p);
        let mut loss = 0.5 * 4.0;
        for _ in 0..2 {
            let x = p[0].data()[0];
            let g = vec![Tensor::scalar(x)];
            adam_step(&mut p, &g, &mut s, 0.1).unwrap();
            let x = p[0].data()[0];
            let next = 0.5 * x * x;
            assert!(next < loss);
            loss = next;
        }
    }

    #[test]
    fn shape_mismatch_is_contract_error() {
        let mut p = vec![Tensor::zeros(&[2])];
        let g = vec![Tensor::zeros(&[3])];
        let mut s = AdamState::new(&p);
        assert!(matches!(
            adam_step(&mut p, &g, &mut s, 0.1),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn second_moment_nonnegative() {
        let mut p = vec![Tensor::from_fn(&[4], |i| i as f64)];
        let mut s = AdamState::new(&p);
        for k in 0..5 {
            let g = vec![Tensor::from_fn(&[4], |i| {
                (i as f64 - 1.5) * (k as f64 - 2.0)
            })];
            adam_step(&mut p, &g, &mut s, 0.01).unwrap();
        }
        assert!(s.v[0].data().iter().all(|v| *v >= 0.0));
    }
}
