//! The network as a composition of tape operations.

use rand::Rng;

use super::config::ModelConfig;
use super::params::Pose2GazeParams;
use crate::error::{Error, Result};
use crate::motiondata::SampleWindow;
use crate::ndops::{dct_matrix, Tape, Tensor, Var, LAYER_NORM_EPS};

/// Columns of the generated gaze shorter than this cannot be normalized.
pub const OUTPUT_NORM_EPS: f64 = 1e-8;

/// Parameters recorded as leaves of one tape.
pub struct BoundParams<'a> {
    params: &'a Pose2GazeParams,
    vars: Vec<Var>,
}

impl<'a> BoundParams<'a> {
    /// Records every parameter on `tape`; `trainable` controls whether
    /// gradients flow to them.
    pub fn bind(tape: &mut Tape, params: &'a Pose2GazeParams, trainable: bool) -> Self {
        let vars = params
            .tensors
            .iter()
            .map(|t| tape.leaf(t.clone(), trainable))
            .collect();
        Self { params, vars }
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    pub fn var(&self, name: &str) -> Result<Var> {
        self.params
            .index_of(name)
            .map(|i| self.vars[i])
            .ok_or_else(|| Error::Contract(format!("missing parameter {name}")))
    }
}

fn conv_ln(tape: &mut Tape, p: &BoundParams, x: Var, conv: &str, ln: Option<&str>) -> Result<Var> {
    let y = tape.conv1d_same(
        x,
        p.var(&format!("{conv}.weight"))?,
        p.var(&format!("{conv}.bias"))?,
    )?;
    let y = match ln {
        Some(ln) => tape.layer_norm(
            y,
            p.var(&format!("{ln}.gamma"))?,
            p.var(&format!("{ln}.beta"))?,
            LAYER_NORM_EPS,
        )?,
        None => y,
    };
    Ok(tape.tanh(y))
}

/// Head directions `3×T` → orientation features `C×T`.
pub fn extract_orientation_features(tape: &mut Tape, p: &BoundParams, head: Var) -> Result<Var> {
    if tape.shape(head).len() != 2 || tape.shape(head)[0] != 3 {
        return Err(Error::Contract(format!(
            "head input must be 3×T, got {:?}",
            tape.shape(head)
        )));
    }
    let x = conv_ln(tape, p, head, "ori.conv1", Some("ori.ln1"))?;
    let x = conv_ln(tape, p, x, "ori.conv2", Some("ori.ln2"))?;
    conv_ln(tape, p, x, "ori.conv3", None)
}

/// Multiplies every length-T trajectory of `x: C×N×T` on the right by `m`.
fn per_trajectory(tape: &mut Tape, x: Var, m: Tensor) -> Result<Var> {
    let s = tape.shape(x).to_vec();
    let t = s[2];
    let flat = tape.reshape(x, &[s[0] * s[1], t])?;
    let m = tape.constant(m);
    let y = tape.matmul(flat, m)?;
    tape.reshape(y, &s)
}

/// DCT coefficients of each (channel, joint) trajectory of `pose: 3×N×T`.
pub fn dct_encode(tape: &mut Tape, cfg: &ModelConfig, pose: Var) -> Result<Var> {
    if !cfg.use_dct {
        return Ok(pose);
    }
    let t = tape.shape(pose)[2];
    per_trajectory(tape, pose, dct_matrix(t)?.transpose2()?)
}

/// One graph convolution `A_S · (X · A_T) · W` on `x: D_in×N×L`.
fn graph_conv(
    tape: &mut Tape,
    cfg: &ModelConfig,
    p: &BoundParams,
    prefix: &str,
    x: Var,
) -> Result<Var> {
    let s = tape.shape(x).to_vec();
    let (din, n, l) = (s[0], s[1], s[2]);
    let mut y = x;
    if cfg.use_tgcn {
        let flat = tape.reshape(y, &[din * n, l])?;
        let a = p.var(&format!("{prefix}.adj_t"))?;
        y = tape.matmul(flat, a)?;
    }
    let flat = tape.reshape(y, &[din, n * l])?;
    let w = p.var(&format!("{prefix}.weight"))?;
    let wt = tape.transpose(w)?;
    let lat = tape.matmul(wt, flat)?;
    let dout = tape.shape(lat)[0];
    let mut y = tape.reshape(lat, &[dout, n, l])?;
    if cfg.use_sgcn {
        let a = p.var(&format!("{prefix}.adj_s"))?;
        y = tape.batched_left_matmul(a, y)?;
    }
    Ok(y)
}

/// `3×N×T` coefficients → latent features `D×N×2T` (duplicated in time).
pub fn start_gcn(tape: &mut Tape, cfg: &ModelConfig, p: &BoundParams, x: Var) -> Result<Var> {
    let s = tape.shape(x);
    if s.len() != 3 || s[0] != 3 || s[1] != cfg.graph_nodes() || s[2] != cfg.seq_len {
        return Err(Error::Contract(format!(
            "pose input {:?} does not match 3×{}×{}",
            s,
            cfg.graph_nodes(),
            cfg.seq_len
        )));
    }
    let f = graph_conv(tape, cfg, p, "start", x)?;
    tape.concat_last(f, f)
}

/// Residual graph convolutions on `D×N×2T`, keeping the first T columns.
pub fn residual_gcn<R: Rng + ?Sized>(
    tape: &mut Tape,
    cfg: &ModelConfig,
    p: &BoundParams,
    f: Var,
    training: bool,
    rng: &mut R,
) -> Result<Var> {
    let mut f = f;
    for i in 0..cfg.residual_blocks {
        let g = graph_conv(tape, cfg, p, &format!("res{i}"), f)?;
        let g = tape.layer_norm(
            g,
            p.var(&format!("res{i}.ln.gamma"))?,
            p.var(&format!("res{i}.ln.beta"))?,
            LAYER_NORM_EPS,
        )?;
        let g = tape.tanh(g);
        let g = tape.dropout(g, cfg.dropout, training, rng)?;
        f = tape.add(f, g)?;
    }
    tape.slice_last(f, 0, cfg.seq_len)
}

/// Inverse DCT per trajectory followed by tanh.
pub fn decode_motion_features(tape: &mut Tape, cfg: &ModelConfig, f: Var) -> Result<Var> {
    let y = if cfg.use_dct {
        let t = tape.shape(f)[2];
        per_trajectory(tape, f, dct_matrix(t)?)?
    } else {
        f
    };
    Ok(tape.tanh(y))
}

/// Fusion convolutions up to (not including) the unit normalization.
pub fn fuse_raw(
    tape: &mut Tape,
    cfg: &ModelConfig,
    p: &BoundParams,
    f_ori: Option<Var>,
    f_mot: Option<Var>,
) -> Result<Var> {
    let mot = match f_mot {
        Some(m) => {
            let s = tape.shape(m).to_vec();
            Some(tape.reshape(m, &[s[0] * s[1], s[2]])?)
        }
        None => None,
    };
    let x = match (mot, f_ori) {
        (Some(m), Some(o)) => tape.concat_rows(m, o)?,
        (Some(m), None) => m,
        (None, Some(o)) => o,
        (None, None) => {
            return Err(Error::Config("fusion needs pose or head features".into()));
        }
    };
    if tape.shape(x)[0] != cfg.fusion_inputs() {
        return Err(Error::Contract(format!(
            "fusion input has {} channels, configuration expects {}",
            tape.shape(x)[0],
            cfg.fusion_inputs()
        )));
    }
    let x = conv_ln(tape, p, x, "fusion.conv1", Some("fusion.ln"))?;
    conv_ln(tape, p, x, "fusion.conv2", None)
}

/// Fusion head producing unit gaze columns `3×T`.
pub fn fuse_and_generate(
    tape: &mut Tape,
    cfg: &ModelConfig,
    p: &BoundParams,
    f_ori: Option<Var>,
    f_mot: Option<Var>,
) -> Result<Var> {
    let raw = fuse_raw(tape, cfg, p, f_ori, f_mot)?;
    tape.normalize_columns(raw, OUTPUT_NORM_EPS)
}

/// Both input streams through their branches and the fusion convolutions,
/// without the final normalization.
pub fn forward_raw<R: Rng + ?Sized>(
    tape: &mut Tape,
    cfg: &ModelConfig,
    p: &BoundParams,
    head: Var,
    pose: Var,
    training: bool,
    rng: &mut R,
) -> Result<Var> {
    cfg.validate()?;
    let f_ori = if cfg.use_head {
        Some(extract_orientation_features(tape, p, head)?)
    } else {
        None
    };
    let f_mot = if cfg.use_pose {
        let x = dct_encode(tape, cfg, pose)?;
        let f = start_gcn(tape, cfg, p, x)?;
        let f = residual_gcn(tape, cfg, p, f, training, rng)?;
        Some(decode_motion_features(tape, cfg, f)?)
    } else {
        None
    };
    fuse_raw(tape, cfg, p, f_ori, f_mot)
}

/// Full network: unit gaze columns `3×T`.
pub fn forward<R: Rng + ?Sized>(
    tape: &mut Tape,
    cfg: &ModelConfig,
    p: &BoundParams,
    head: Var,
    pose: Var,
    training: bool,
    rng: &mut R,
) -> Result<Var> {
    let raw = forward_raw(tape, cfg, p, head, pose, training, rng)?;
    tape.normalize_columns(raw, OUTPUT_NORM_EPS)
}

/// Head `3×T` and pose `3×N'×T` tensors for `window`, with partner joints
/// dropped when the configuration disables them.
pub fn window_inputs(cfg: &ModelConfig, window: &SampleWindow) -> Result<(Tensor, Tensor)> {
    let (t, joints) = (window.seq_len(), window.pose_joints());
    if t != cfg.seq_len {
        return Err(Error::Contract(format!(
            "window has T={t}, model expects T={}",
            cfg.seq_len
        )));
    }
    if joints != cfg.window_joints() {
        return Err(Error::Contract(format!(
            "window has {joints} pose joints, model expects {} ({} per person{})",
            cfg.window_joints(),
            cfg.n_joints,
            if cfg.partner { ", with partner" } else { "" }
        )));
    }
    let n = cfg.graph_nodes();
    let pose = if n == joints {
        window.pose_in.clone()
    } else {
        let src = window.pose_in.data();
        let mut data = Vec::with_capacity(3 * n * t);
        for c in 0..3 {
            data.extend_from_slice(&src[c * joints * t..(c * joints + n) * t]);
        }
        Tensor::new(vec![3, n, t], data)?
    };
    Ok((window.head_in.clone(), pose))
}
