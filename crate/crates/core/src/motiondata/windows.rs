use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::recording::Recording;
use crate::error::{Error, Result};
use crate::ndops::Tensor;

/// Default sequence length: 15 frames, 500 ms at 30 fps.
pub const DEFAULT_SEQ_LEN: usize = 15;

/// Temporal relation between the input window and the target gaze window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Setting {
    Past,
    Present,
    Future,
}

impl Setting {
    pub const ALL: [Setting; 3] = [Setting::Past, Setting::Present, Setting::Future];

    /// First frame of the head input, pose input and gaze target for anchor `t`.
    /// Targets always cover `t+1..=t+T`.
    fn starts(self, anchor: usize, t: usize) -> (usize, usize, usize) {
        match self {
            Setting::Past => (anchor + 1 - t, anchor + 1 - t, anchor + 1),
            Setting::Present => (anchor + 1, anchor + 1, anchor + 1),
            Setting::Future => (anchor + 1, anchor + 1 + t, anchor + 1),
        }
    }

    fn first_anchor(self, t: usize) -> usize {
        match self {
            Setting::Past => t - 1,
            Setting::Present | Setting::Future => 0,
        }
    }

    /// Largest frame index a window anchored at `anchor` touches.
    fn last_frame(self, anchor: usize, t: usize) -> usize {
        match self {
            Setting::Past | Setting::Present => anchor + t,
            Setting::Future => anchor + 2 * t,
        }
    }

    /// Number of windows `make_windows` emits for `frames` frames.
    pub fn window_count(self, frames: usize, t: usize, stride: usize) -> usize {
        if t == 0 || stride == 0 {
            return 0;
        }
        let first = self.first_anchor(t);
        if frames == 0 || self.last_frame(first, t) > frames - 1 {
            return 0;
        }
        let last = frames - 1 - (self.last_frame(first, t) - first);
        (last - first) / stride + 1
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Setting::Past => "past",
            Setting::Present => "present",
            Setting::Future => "future",
        })
    }
}

impl FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "past" => Ok(Setting::Past),
            "present" => Ok(Setting::Present),
            "future" => Ok(Setting::Future),
            other => Err(Error::Parameter(format!(
                "unknown setting '{other}' (expected past, present or future)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowSource {
    pub recording: String,
    pub activity: String,
    pub anchor: usize,
}

/// One aligned sample: head `3×T`, pose `3×N'×T`, target gaze `3×T`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleWindow {
    pub setting: Setting,
    pub head_in: Tensor,
    pub pose_in: Tensor,
    pub gaze_target: Tensor,
    pub source: WindowSource,
}

impl SampleWindow {
    pub fn seq_len(&self) -> usize {
        self.head_in.shape()[1]
    }

    /// Joint count of the pose input, partner joints included.
    pub fn pose_joints(&self) -> usize {
        self.pose_in.shape()[1]
    }
}

fn column_block(vs: &[[f64; 3]], start: usize, t: usize) -> Tensor {
    let mut data = vec![0.0; 3 * t];
    for k in 0..t {
        let v = vs[start + k];
        for c in 0..3 {
            data[c * t + k] = v[c];
        }
    }
    Tensor::new(vec![3, t], data).expect("3×T block")
}

/// Cuts a recording into aligned windows for one generation setting.
///
/// Anchors run `t0, t0 + stride, …` where `t0 = T-1` for `Past` and `0`
/// otherwise; the target gaze is always frames `t+1..=t+T`.
pub fn make_windows(
    rec: &Recording,
    setting: Setting,
    t: usize,
    stride: usize,
) -> Result<Vec<SampleWindow>> {
    if t == 0 || stride == 0 {
        return Err(Error::Parameter(format!(
            "window length and stride must be positive (T={t}, stride={stride})"
        )));
    }
    let frames = rec.frames();
    let count = setting.window_count(frames, t, stride);
    let n = rec.joints();
    let total_joints = if rec.has_partner() { 2 * n } else { n };
    let first = setting.first_anchor(t);
    let mut out = Vec::with_capacity(count);
    for w in 0..count {
        let anchor = first + w * stride;
        let (hs, ps, gs) = setting.starts(anchor, t);
        let mut pose = vec![0.0; 3 * total_joints * t];
        for j in 0..total_joints {
            for k in 0..t {
                let p = if j < n {
                    rec.position(j, ps + k)
                } else {
                    rec.partner_position(j - n, ps + k)
                        .expect("partner present")
                };
                for c in 0..3 {
                    pose[(c * total_joints + j) * t + k] = p[c];
                }
            }
        }
        out.push(SampleWindow {
            setting,
            head_in: column_block(&rec.head_dirs, hs, t),
            pose_in: Tensor::new(vec![3, total_joints, t], pose)?,
            gaze_target: column_block(&rec.gaze_dirs, gs, t),
            source: WindowSource {
                recording: rec.id.clone(),
                activity: rec.activity.clone(),
                anchor,
            },
        });
    }
    Ok(out)
}
