use crate::error::{Error, Result};
use crate::ndops::{Tape, Tensor, Var};

/// Dot products are kept `ACOS_BOUND` away from ±1 so the arccos gradient
/// stays finite.
pub const ACOS_BOUND: f64 = 1e-12;

const UNIT_TOL: f64 = 1e-6;

fn check_pair(pred: &[usize], target: &[usize]) -> Result<()> {
    if pred.len() != 2 || pred[0] != 3 || pred != target {
        return Err(Error::Dimension(format!(
            "angular loss needs two 3×T inputs, got {pred:?} and {target:?}"
        )));
    }
    Ok(())
}

fn check_unit(x: &Tensor, what: &str) -> Result<()> {
    let t = x.shape()[1];
    for j in 0..t {
        let n = (0..3).map(|r| x.at2(r, j).powi(2)).sum::<f64>().sqrt();
        if n.is_nan() || (n - 1.0).abs() > UNIT_TOL {
            return Err(Error::Contract(format!(
                "{what} column {j} has norm {n}, expected 1"
            )));
        }
    }
    Ok(())
}

/// Mean over columns of `acos(ĝ·g)` in radians.
pub fn angular_loss(pred: &Tensor, target: &Tensor) -> Result<f64> {
    check_pair(pred.shape(), target.shape())?;
    check_unit(pred, "prediction")?;
    check_unit(target, "target")?;
    let t = pred.shape()[1];
    let (lo, hi) = (-1.0 + ACOS_BOUND, 1.0 - ACOS_BOUND);
    let sum: f64 = (0..t)
        .map(|j| {
            let d: f64 = (0..3).map(|r| pred.at2(r, j) * target.at2(r, j)).sum();
            d.clamp(lo, hi).acos()
        })
        .sum();
    Ok(sum / t as f64)
}

/// [`angular_loss`] recorded on a tape.
pub fn angular_loss_tape(tape: &mut Tape, pred: Var, target: Var) -> Result<Var> {
    check_pair(tape.shape(pred), tape.shape(target))?;
    check_unit(tape.value(target), "target")?;
    let prod = tape.mul(pred, target)?;
    let dots = tape.sum_axis0(prod)?;
    let angles = tape.acos_clamped(dots, ACOS_BOUND);
    Ok(tape.mean(angles))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cols(v: &[[f64; 3]]) -> Tensor {
        let t = v.len();
        Tensor::from_fn(&[3, t], |i| v[i % t][i / t])
    }

    #[test]
    fn identical_orthogonal_antiparallel() {
        let a = cols(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
        assert!(angular_loss(&a, &a).unwrap() <= 1e-5);
        let b = cols(&[[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]);
        assert!((angular_loss(&a, &b).unwrap() - PI / 2.0).abs() <= 1e-12);
        let c = cols(&[[-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]]);
        assert!((angular_loss(&a, &c).unwrap() - PI).abs() <= 1e-5);
    }

    #[test]
    fn tape_matches_plain() {
        let a = cols(&[[0.6, 0.8, 0.0], [0.0, 0.6, 0.8]]);
        let b = cols(&[[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]);
        let mut tape = Tape::new();
        let (pa, pb) = (tape.param(a.clone()), tape.constant(b.clone()));
        let l = angular_loss_tape(&mut tape, pa, pb).unwrap();
        assert!((tape.value(l).item().unwrap() - angular_loss(&a, &b).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn non_unit_input_rejected() {
        let a = cols(&[[0.9, 0.0, 0.0]]);
        let b = cols(&[[1.0, 0.0, 0.0]]);
        assert!(matches!(angular_loss(&a, &b), Err(Error::Contract(_))));
    }
}
