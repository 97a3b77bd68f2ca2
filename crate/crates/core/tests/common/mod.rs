#![allow(dead_code)]

use pose2gaze::model::{forward, BoundParams, ModelConfig, Pose2GazeParams};
use pose2gaze::ndops::{Tape, Tensor, Var};
use pose2gaze::trainer::angular_loss_tape;
use pose2gaze::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const FD_STEP: f64 = 1e-5;

pub fn randn(shape: &[usize], rng: &mut impl Rng) -> Tensor {
    Tensor::from_fn(shape, |_| rng.sample::<f64, _>(StandardNormal))
}

/// Columns of a random `3×t` matrix scaled to unit length.
pub fn unit_columns(t: usize, rng: &mut impl Rng) -> Tensor {
    let m = randn(&[3, t], rng);
    let mut out = m.clone();
    for k in 0..t {
        let n = (0..3).map(|c| m.at2(c, k).powi(2)).sum::<f64>().sqrt();
        for c in 0..3 {
            out.data_mut()[c * t + k] = m.at2(c, k) / n;
        }
    }
    out
}

/// `‖a − b‖ / max(‖a‖, ‖b‖, 1e-6)`.
pub fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let l2 = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = l2(&mut a.iter().zip(b).map(|(x, y)| x - y));
    let scale = l2(&mut a.iter().copied())
        .max(l2(&mut b.iter().copied()))
        .max(1e-6);
    diff / scale
}

pub type ScalarFn = dyn Fn(&mut Tape, &[Var]) -> Result<Var>;

/// Contracts any output to a scalar with fixed pseudo-random weights so
/// that every output entry contributes a distinct gradient.
pub fn weighted_sum(tape: &mut Tape, y: Var) -> Result<Var> {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let w = tape.constant(randn(tape.shape(y), &mut rng));
    let p = tape.mul(y, w)?;
    Ok(tape.sum(p))
}

/// Relative L2 error between tape gradients and central differences, one
/// entry per input tensor.
pub fn fd_errors(inputs: &[Tensor], f: &ScalarFn) -> Result<Vec<f64>> {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let loss = f(&mut tape, &vars)?;
    tape.backward(loss)?;
    let eval = |xs: &[Tensor]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = xs.iter().map(|t| tape.constant(t.clone())).collect();
        let l = f(&mut tape, &vars)?;
        tape.value(l).item()
    };
    let mut errs = Vec::new();
    for (i, v) in vars.iter().enumerate() {
        let analytic = tape
            .grad(*v)
            .unwrap_or_else(|| Tensor::zeros(inputs[i].shape()));
        let mut numeric = vec![0.0; inputs[i].len()];
        let mut xs = inputs.to_vec();
        for (j, slot) in numeric.iter_mut().enumerate() {
            let x0 = inputs[i].data()[j];
            xs[i].data_mut()[j] = x0 + FD_STEP;
            let up = eval(&xs)?;
            xs[i].data_mut()[j] = x0 - FD_STEP;
            let down = eval(&xs)?;
            xs[i].data_mut()[j] = x0;
            *slot = (up - down) / (2.0 * FD_STEP);
        }
        errs.push(rel_l2(analytic.data(), &numeric));
    }
    Ok(errs)
}

/// Named primitive cases: input shapes and a scalar-valued composition.
pub type Case = (&'static str, Vec<Vec<usize>>, Box<ScalarFn>);

pub fn primitive_cases() -> Vec<Case> {
    let mut cases: Vec<Case> = Vec::new();
    cases.push((
        "matmul",
        vec![vec![3, 4], vec![4, 2]],
        Box::new(|t, v| {
            let y = t.matmul(v[0], v[1])?;
            weighted_sum(t, y)
        }),
    ));
    cases.push((
        "batched_left_matmul",
        vec![vec![3, 4], vec![2, 4, 5]],
        Box::new(|t, v| {
            let y = t.batched_left_matmul(v[0], v[1])?;
            weighted_sum(t, y)
        }),
    ));
    cases.push((
        "transpose",
        vec![vec![3, 4]],
        Box::new(|t, v| {
            let y = t.transpose(v[0])?;
            weighted_sum(t, y)
        }),
    ));
    cases.push((
        "reshape",
        vec![vec![2, 6]],
        Box::new(|t, v| {
            let y = t.reshape(v[0], &[3, 4])?;
            weighted_sum(t, y)
        }),
    ));
    cases.push((
        "add",
        vec![vec![3, 4], vec![3, 4]],
        Box::new(|t, v| {
            let y = t.add(v[0], v[1])?;
            let y = t.mul(y, y)?;
            weighted_sum(t, y)
        }),
    ));
    cases.push((
        "mul",
        vec![vec![3, 4], vec![3, 4]],
        Box::new(|t, v| {
            let y = t.mul(v[0], v[1])?;
            weighted_sum(t, y)
        }),
    ));
    cases.push((
        "tanh",
        vec![vec![3, 4]],
        Box::new(|t, v| {
            let y = t.tanh(v[0]);
            weighted_sum(t, y)
        }),
    ));
    cases.push((
        "dropout",
        vec![vec![3, 4]],
        Box::new(|t, v| {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let y = t.dropout(v[0], 0.3, true, &mut rng)?;
            weighted_sum(t, y)
        }),
    ));
    cases.push((
        "conv1d_same",
        vec![vec![3, 5], vec![4, 3, 3], vec![4]],
        Box::new(|t, v| {
            let y = t.conv1d_same(v[0], v[1], v[2])?;
            weighted_sum(t, y)
        }),
    ));
    cases.push((
        "layer_norm",
        vec![vec![4, 2, 3], vec![4], vec![4]],
        Box::new(|t, v| {
            let y = t.layer_norm(v[0], v[1], v[2], 1e-5)?;
            weighted_sum(t, y)
        }),
    ));
    cases.push((
        "concat_rows",
        vec![vec![2, 3], vec![1, 3]],
        Box::new(|t, v| {
            let y = t.concat_rows(v[0], v[1])?;
            weighted_sum(t, y)
        }),
    ));
    cases.push((
        "concat_last",
        vec![vec![2, 2, 3], vec![2, 2, 2]],
        Box::new(|t, v| {
            let y = t.concat_last(v[0], v[1])?;
            weighted_sum(t, y)
        }),
    ));
    cases.push((
        "slice_last",
        vec![vec![2, 5]],
        Box::new(|t, v| {
            let y = t.slice_last(v[0], 1, 3)?;
            weighted_sum(t, y)
        }),
    ));
    cases.push((
        "normalize_columns",
        vec![vec![3, 5]],
        Box::new(|t, v| {
            let y = t.normalize_columns(v[0], 1e-8)?;
            weighted_sum(t, y)
        }),
    ));
    cases.push((
        "sum_axis0",
        vec![vec![3, 2, 2]],
        Box::new(|t, v| {
            let y = t.sum_axis0(v[0])?;
            weighted_sum(t, y)
        }),
    ));
    cases.push((
        "acos_clamped",
        vec![vec![6]],
        Box::new(|t, v| {
            // squash into (-0.9, 0.9) so the clamp stays inactive
            let s = t.tanh(v[0]);
            let k = t.constant(Tensor::full(&[6], 0.9));
            let s = t.mul(s, k)?;
            let y = t.acos_clamped(s, 1e-12);
            weighted_sum(t, y)
        }),
    ));
    cases.push((
        "sum",
        vec![vec![3, 4]],
        Box::new(|t, v| {
            let y = t.mul(v[0], v[0])?;
            Ok(t.sum(y))
        }),
    ));
    cases.push((
        "mean",
        vec![vec![3, 4]],
        Box::new(|t, v| {
            let y = t.mul(v[0], v[0])?;
            Ok(t.mean(y))
        }),
    ));
    cases.push((
        "angular_loss",
        vec![vec![3, 5]],
        Box::new(|t, v| {
            let mut rng = ChaCha8Rng::seed_from_u64(6);
            let target = t.constant(unit_columns(5, &mut rng));
            let p = t.normalize_columns(v[0], 1e-8)?;
            angular_loss_tape(t, p, target)
        }),
    ));
    cases
}

/// Worst per-tensor relative error of a primitive case over `instances`
/// random draws.
pub fn primitive_worst(shapes: &[Vec<usize>], f: &ScalarFn, instances: u64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for s in 0..instances {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + s);
        let inputs: Vec<Tensor> = shapes.iter().map(|sh| randn(sh, &mut rng)).collect();
        for e in fd_errors(&inputs, f)? {
            worst = worst.max(e);
        }
    }
    Ok(worst)
}

/// Angular loss of the full model (training mode, fixed dropout mask) as
/// a function of its parameters.
pub fn model_loss(
    cfg: &ModelConfig,
    params: &Pose2GazeParams,
    head: &Tensor,
    pose: &Tensor,
    target: &Tensor,
    trainable: bool,
) -> Result<(Tape, Vec<Var>, Var)> {
    let mut tape = Tape::new();
    let bound = BoundParams::bind(&mut tape, params, trainable);
    let h = tape.constant(head.clone());
    let p = tape.constant(pose.clone());
    let g = tape.constant(target.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let out = forward(&mut tape, cfg, &bound, h, p, true, &mut rng)?;
    let loss = angular_loss_tape(&mut tape, out, g)?;
    let vars = bound.vars().to_vec();
    Ok((tape, vars, loss))
}

/// Worst per-tensor relative FD error over all parameters of one random
/// model instance.
pub fn model_fd_worst(cfg: &ModelConfig, seed: u64) -> Result<(f64, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = Pose2GazeParams::init(cfg, seed)?;
    let t = cfg.seq_len;
    let head = unit_columns(t, &mut rng);
    let pose = randn(&[3, cfg.window_joints(), t], &mut rng);
    let target = unit_columns(t, &mut rng);
    let (mut tape, vars, loss) = model_loss(cfg, &params, &head, &pose, &target, true)?;
    tape.backward(loss)?;
    let mut worst = (0.0, String::new());
    let mut probe = params.clone();
    for (i, v) in vars.iter().enumerate() {
        let analytic = tape
            .grad(*v)
            .unwrap_or_else(|| Tensor::zeros(params.tensors[i].shape()));
        let mut numeric = vec![0.0; analytic.len()];
        for (j, slot) in numeric.iter_mut().enumerate() {
            let x0 = params.tensors[i].data()[j];
            let mut at = |x: f64| -> Result<f64> {
                probe.tensors[i].data_mut()[j] = x;
                let (tape, _, l) = model_loss(cfg, &probe, &head, &pose, &target, false)?;
                tape.value(l).item()
            };
            let up = at(x0 + FD_STEP)?;
            let down = at(x0 - FD_STEP)?;
            at(x0)?;
            *slot = (up - down) / (2.0 * FD_STEP);
        }
        let e = rel_l2(analytic.data(), &numeric);
        if e > worst.0 {
            worst = (e, params.names[i].clone());
        }
    }
    Ok(worst)
}

use pose2gaze::motiondata::{Recording, SkeletonSpec, Vec3};

pub fn random_unit(rng: &mut impl Rng) -> Vec3 {
    loop {
        let v: Vec3 = [
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 1e-3 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

/// Random recording with every optional channel. Roughly one step in five
/// holds a joint still so that motion masking is exercised.
pub fn random_recording(seed: u64, joints: usize, frames: usize, activity: &str) -> Recording {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut positions = Vec::with_capacity(joints * frames);
    for _ in 0..joints {
        let mut p: Vec3 = [rng.random(), rng.random(), rng.random()];
        for f in 0..frames {
            if f > 0 && rng.random::<f64>() > 0.2 {
                let s = random_unit(&mut rng);
                p = [p[0] + 0.05 * s[0], p[1] + 0.05 * s[1], p[2] + 0.05 * s[2]];
            }
            positions.push(p);
        }
    }
    let partner = (0..joints * frames)
        .map(|i| {
            let p = positions[i];
            [
                p[0] + 1.0 + rng.random::<f64>(),
                p[1] - rng.random::<f64>(),
                p[2],
            ]
        })
        .collect();
    let units = |n: usize, rng: &mut ChaCha8Rng| (0..n).map(|_| random_unit(rng)).collect();
    let rec = Recording {
        id: format!("rand-{seed}"),
        skeleton: SkeletonSpec::generic(joints).unwrap(),
        fps: 30.0,
        activity: activity.into(),
        positions,
        head_dirs: units(frames, &mut rng),
        gaze_dirs: units(frames, &mut rng),
        joint_orient_dirs: Some(units(joints * frames, &mut rng)),
        partner_positions: Some(partner),
    };
    rec.validate().unwrap();
    rec
}

/// Cosine computed from scratch: dot over the product of norms.
pub fn oracle_cos(a: Vec3, b: Vec3) -> f64 {
    let d: f64 = (0..3).map(|i| a[i] * b[i]).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    d / (na * nb)
}

/// Spearman from O(n²) rank counting and a textbook Pearson.
pub fn oracle_spearman(x: &[f64], y: &[f64]) -> f64 {
    let rank = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .map(|a| {
                let below = v.iter().filter(|b| *b < a).count() as f64;
                let equal = v.iter().filter(|b| *b == a).count() as f64;
                below + (equal + 1.0) / 2.0
            })
            .collect()
    };
    let (rx, ry) = (rank(x), rank(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

/// Angle in degrees via atan2 of the cross and dot products.
pub fn oracle_angle_deg(a: Vec3, b: Vec3) -> f64 {
    let c = [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ];
    let cn = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
    let d = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    cn.atan2(d).to_degrees()
}

/// `(sum, count)` per activity and joint for a pairing rule, then the
/// table's per-cell means and count-weighted row averages.
pub type OracleTable = std::collections::BTreeMap<String, (Vec<(f64, u64)>, f64)>;

pub fn oracle_table(
    recs: &[Recording],
    pair: impl Fn(&Recording, usize, usize) -> Option<(Vec3, Vec3)>,
    steps: impl Fn(&Recording) -> usize,
) -> OracleTable {
    let mut acc: std::collections::BTreeMap<String, Vec<(f64, u64)>> = Default::default();
    for r in recs {
        let row = acc
            .entry(r.activity.clone())
            .or_insert_with(|| vec![(0.0, 0); r.joints()]);
        for (j, cell) in row.iter_mut().enumerate() {
            for t in 0..steps(r) {
                if let Some((a, b)) = pair(r, j, t) {
                    cell.0 += oracle_cos(a, b);
                    cell.1 += 1;
                }
            }
        }
    }
    acc.into_iter()
        .map(|(k, cells)| {
            let total: f64 = cells.iter().map(|c| c.0).sum();
            let n: u64 = cells.iter().map(|c| c.1).sum();
            let means = cells
                .iter()
                .map(|c| (if c.1 > 0 { c.0 / c.1 as f64 } else { f64::NAN }, c.1))
                .collect();
            (k, (means, total / n as f64))
        })
        .collect()
}

pub fn oracle_motion_pair(r: &Recording, j: usize, t: usize) -> Option<(Vec3, Vec3)> {
    let (a, b) = (r.position(j, t), r.position(j, t + 1));
    let d = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    (n >= 1e-6).then_some((r.gaze_dirs[t], d))
}

pub fn oracle_interbody_pair(r: &Recording, j: usize, t: usize) -> Option<(Vec3, Vec3)> {
    let (a, b) = (r.position(j, t), r.partner_position(j, t).unwrap());
    Some((r.gaze_dirs[t], [b[0] - a[0], b[1] - a[1], b[2] - a[2]]))
}

pub fn oracle_orientation_pair(r: &Recording, j: usize, t: usize) -> Option<(Vec3, Vec3)> {
    Some((r.gaze_dirs[t], r.orientation(j, t).unwrap()))
}

/// Largest deviation between a library table and an oracle table; panics
/// on structural disagreement.
pub fn table_deviation(t: &pose2gaze::coordination::CorrelationTable, o: &OracleTable) -> f64 {
    assert_eq!(t.rows(), o.keys().map(String::as_str).collect::<Vec<_>>());
    let mut worst: f64 = 0.0;
    for (act, (cells, avg)) in o {
        for (j, (m, n)) in cells.iter().enumerate() {
            assert_eq!(t.count(act, j), *n, "{act}/{j}");
            if *n > 0 {
                worst = worst.max((t.value(act, j).unwrap() - m).abs());
            }
        }
        worst = worst.max((t.average(act).unwrap() - avg).abs());
    }
    worst
}
