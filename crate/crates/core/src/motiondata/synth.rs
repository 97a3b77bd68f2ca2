//! Synthetic recordings with a known eye-body coupling.
//!
//! Joint trajectories are sums of low-frequency sinusoids (a shared root
//! drift, a per-joint sway and a larger reaching motion on one dominant
//! joint). Head direction is an independent smooth yaw/pitch process.
//! Gaze at frame `t` is the spherical blend of the head direction at `t`
//! and the dominant joint's motion direction at `t + lag_frames`, with
//! isotropic angular noise on top.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::recording::Recording;
use super::skeleton::{BodyPart, SkeletonSpec};
use super::vec3::{add, cross, normalize, orthogonal, scale, slerp, sub, Vec3};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    /// Joint count when no skeleton is given.
    pub joints: usize,
    pub frames: usize,
    pub fps: f64,
    /// Frame offset between gaze and the motion it follows; positive means
    /// gaze leads the body.
    pub lag_frames: i64,
    /// Per-axis standard deviation of the angular gaze noise, in degrees.
    pub noise_deg: f64,
    pub partner: bool,
    /// Blend fraction toward the motion direction (0 = gaze follows head).
    pub motion_weight: f64,
    pub dominant_joint: Option<usize>,
    pub activity: String,
    pub skeleton: Option<SkeletonSpec>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            joints: 8,
            frames: 900,
            fps: 30.0,
            lag_frames: 9,
            noise_deg: 5.0,
            partner: false,
            motion_weight: 0.5,
            dominant_joint: None,
            activity: "synthetic".into(),
            skeleton: None,
        }
    }
}

impl SynthConfig {
    pub fn skeleton(&self) -> Result<SkeletonSpec> {
        match &self.skeleton {
            Some(s) => {
                s.validate()?;
                Ok(s.clone())
            }
            None => SkeletonSpec::generic(self.joints),
        }
    }

    /// Joint whose motion the gaze follows: the configured one, otherwise
    /// the last Arm joint, otherwise the last joint.
    pub fn dominant_index(&self, skeleton: &SkeletonSpec) -> usize {
        if let Some(j) = self.dominant_joint {
            return j;
        }
        skeleton
            .parts
            .get(&BodyPart::Arm)
            .and_then(|arm| arm.last())
            .and_then(|name| skeleton.index_of(name))
            .unwrap_or(skeleton.len() - 1)
    }

    fn validate(&self, skeleton: &SkeletonSpec) -> Result<()> {
        if self.frames as i64 <= self.lag_frames.abs() + 2 {
            return Err(Error::Parameter(format!(
                "synth: frames ({}) must exceed |lag_frames| + 2 ({})",
                self.frames,
                self.lag_frames.abs() + 2
            )));
        }
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return Err(Error::Parameter(format!(
                "synth: fps must be positive, got {}",
                self.fps
            )));
        }
        if !(self.noise_deg >= 0.0 && self.noise_deg.is_finite()) {
            return Err(Error::Parameter(format!(
                "synth: noise_deg must be non-negative, got {}",
                self.noise_deg
            )));
        }
        if !(0.0..=1.0).contains(&self.motion_weight) {
            return Err(Error::Parameter(format!(
                "synth: motion_weight must lie in [0, 1], got {}",
                self.motion_weight
            )));
        }
        if self.dominant_index(skeleton) >= skeleton.len() {
            return Err(Error::Parameter(format!(
                "synth: dominant joint {} out of range for {} joints",
                self.dominant_index(skeleton),
                skeleton.len()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy)]
struct Wave {
    amp: f64,
    freq: f64,
    phase: f64,
}

impl Wave {
    fn random(rng: &mut ChaCha8Rng, amp: (f64, f64), freq: (f64, f64)) -> Self {
        Self {
            amp: rng.random_range(amp.0..amp.1),
            freq: rng.random_range(freq.0..freq.1),
            phase: rng.random_range(0.0..TAU),
        }
    }

    fn at(&self, secs: f64) -> f64 {
        self.amp * (TAU * self.freq * secs + self.phase).sin()
    }
}

/// Sum-of-sinusoids signal per axis.
struct Signal3 {
    axes: [Vec<Wave>; 3],
}

impl Signal3 {
    fn random(rng: &mut ChaCha8Rng, count: usize, amp: [(f64, f64); 3], freq: (f64, f64)) -> Self {
        let mut axis = |a: (f64, f64)| (0..count).map(|_| Wave::random(rng, a, freq)).collect();
        let x = axis(amp[0]);
        let y = axis(amp[1]);
        let z = axis(amp[2]);
        Self { axes: [x, y, z] }
    }

    fn at(&self, secs: f64) -> Vec3 {
        let s = |ws: &Vec<Wave>| ws.iter().map(|w| w.at(secs)).sum::<f64>();
        [s(&self.axes[0]), s(&self.axes[1]), s(&self.axes[2])]
    }
}

fn yaw_pitch(yaw: f64, pitch: f64) -> Vec3 {
    [
        pitch.cos() * yaw.cos(),
        pitch.cos() * yaw.sin(),
        pitch.sin(),
    ]
}

/// Joint-major positions for one body.
fn body_positions(
    rng: &mut ChaCha8Rng,
    skeleton: &SkeletonSpec,
    frames: usize,
    fps: f64,
    origin: Vec3,
    dominant: usize,
) -> Vec<Vec3> {
    let n = skeleton.len();
    let head = skeleton.head_index();
    let root = Signal3::random(rng, 2, [(0.2, 0.6), (0.2, 0.6), (0.0, 0.01)], (0.03, 0.15));
    let offsets: Vec<Vec3> = (0..n)
        .map(|j| {
            let z = if j == head {
                1.7
            } else {
                rng.random_range(0.1..1.6)
            };
            [
                rng.random_range(-0.25..0.25),
                rng.random_range(-0.25..0.25),
                z,
            ]
        })
        .collect();
    let sway: Vec<Signal3> = (0..n)
        .map(|_| {
            Signal3::random(
                rng,
                2,
                [(0.01, 0.04), (0.01, 0.04), (0.005, 0.02)],
                (0.2, 0.8),
            )
        })
        .collect();
    let reach = Signal3::random(
        rng,
        3,
        [(0.08, 0.25), (0.08, 0.25), (0.04, 0.12)],
        (0.3, 1.2),
    );
    let mut out = vec![[0.0; 3]; n * frames];
    for f in 0..frames {
        let secs = f as f64 / fps;
        let r = add(origin, root.at(secs));
        for j in 0..n {
            let mut p = add(add(r, offsets[j]), sway[j].at(secs));
            if j == dominant {
                p = add(p, reach.at(secs));
            }
            out[j * frames + f] = p;
        }
    }
    out
}

/// Deterministic synthetic recording for `seed`.
pub fn synth_generate(cfg: &SynthConfig, seed: u64) -> Result<Recording> {
    let skeleton = cfg.skeleton()?;
    cfg.validate(&skeleton)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (frames, fps, n) = (cfg.frames, cfg.fps, skeleton.len());
    let dominant = cfg.dominant_index(&skeleton);
    let head_joint = skeleton.head_index();

    let positions = body_positions(&mut rng, &skeleton, frames, fps, [0.0; 3], dominant);

    let yaw0 = rng.random_range(-PI..PI);
    let yaw_waves: Vec<Wave> = (0..3)
        .map(|_| {
            Wave::random(
                &mut rng,
                (10f64.to_radians(), 35f64.to_radians()),
                (0.05, 0.4),
            )
        })
        .collect();
    let pitch_waves: Vec<Wave> = (0..2)
        .map(|_| {
            Wave::random(
                &mut rng,
                (3f64.to_radians(), 10f64.to_radians()),
                (0.1, 0.5),
            )
        })
        .collect();
    let body_waves: Vec<Wave> = (0..2)
        .map(|_| {
            Wave::random(
                &mut rng,
                (5f64.to_radians(), 20f64.to_radians()),
                (0.02, 0.1),
            )
        })
        .collect();
    let yaw_at = |secs: f64| yaw0 + yaw_waves.iter().map(|w| w.at(secs)).sum::<f64>();
    let pitch_at =
        |secs: f64| -10f64.to_radians() + pitch_waves.iter().map(|w| w.at(secs)).sum::<f64>();
    let body_yaw_at = |secs: f64| yaw0 + body_waves.iter().map(|w| w.at(secs)).sum::<f64>();

    let head_dirs: Vec<Vec3> = (0..frames)
        .map(|f| {
            let s = f as f64 / fps;
            yaw_pitch(yaw_at(s), pitch_at(s))
        })
        .collect();

    let follow: Vec<f64> = (0..n)
        .map(|j| {
            if j == head_joint {
                1.0
            } else {
                rng.random_range(0.2..0.8)
            }
        })
        .collect();
    let mut orient = vec![[0.0; 3]; n * frames];
    for f in 0..frames {
        let body = yaw_pitch(body_yaw_at(f as f64 / fps), 0.0);
        for j in 0..n {
            orient[j * frames + f] = if j == head_joint {
                head_dirs[f]
            } else {
                slerp(body, head_dirs[f], follow[j])
            };
        }
    }

    let track = &positions[dominant * frames..(dominant + 1) * frames];
    let motion_dir = |u: usize| normalize(sub(track[u + 1], track[u]), 1e-9);
    let sigma = cfg.noise_deg.to_radians();
    let gaze_dirs: Vec<Vec3> = (0..frames)
        .map(|f| {
            let u = (f as i64 + cfg.lag_frames).clamp(0, frames as i64 - 2) as usize;
            let h = head_dirs[f];
            let g = match motion_dir(u) {
                Some(m) if cfg.motion_weight > 0.0 => slerp(h, m, cfg.motion_weight),
                _ => h,
            };
            if sigma == 0.0 {
                return g;
            }
            let a: f64 = rng.sample::<f64, _>(StandardNormal) * sigma;
            let b: f64 = rng.sample::<f64, _>(StandardNormal) * sigma;
            perturb(g, a, b)
        })
        .collect();

    let partner_positions = if cfg.partner {
        let origin = [1.5, 0.0, 0.0];
        Some(body_positions(
            &mut rng, &skeleton, frames, fps, origin, dominant,
        ))
    } else {
        None
    };

    let rec = Recording {
        id: format!("synth-{seed}"),
        skeleton,
        fps,
        activity: cfg.activity.clone(),
        positions,
        head_dirs,
        gaze_dirs,
        joint_orient_dirs: Some(orient),
        partner_positions,
    };
    rec.validate()?;
    Ok(rec)
}

/// Rotates unit `g` by the tangent offset `(a, b)` radians.
fn perturb(g: Vec3, a: f64, b: f64) -> Vec3 {
    let u = orthogonal(g);
    let v = cross(g, u);
    let mag = (a * a + b * b).sqrt();
    if mag == 0.0 {
        return g;
    }
    let dir = add(scale(u, a / mag), scale(v, b / mag));
    let out = add(scale(g, mag.cos()), scale(dir, mag.sin()));
    normalize(out, 1e-12).unwrap_or(g)
}
