use std::ops::Range;

use super::skeleton::SkeletonSpec;
use super::vec3::{norm, Vec3};
use crate::error::{Error, Result};

/// Unit vectors may deviate from norm 1 by at most this much.
pub const UNIT_TOLERANCE: f64 = 1e-6;

/// One time-aligned capture of a person (and optionally their partner).
///
/// Per-joint channels are stored joint-major: entry `j * frames + f`.
#[derive(Clone, Debug, PartialEq)]
pub struct Recording {
    pub id: String,
    pub skeleton: SkeletonSpec,
    pub fps: f64,
    pub activity: String,
    pub positions: Vec<Vec3>,
    pub head_dirs: Vec<Vec3>,
    pub gaze_dirs: Vec<Vec3>,
    pub joint_orient_dirs: Option<Vec<Vec3>>,
    pub partner_positions: Option<Vec<Vec3>>,
}

impl Recording {
    pub fn frames(&self) -> usize {
        self.head_dirs.len()
    }

    pub fn joints(&self) -> usize {
        self.skeleton.len()
    }

    pub fn position(&self, joint: usize, frame: usize) -> Vec3 {
        self.positions[joint * self.frames() + frame]
    }

    pub fn partner_position(&self, joint: usize, frame: usize) -> Option<Vec3> {
        let f = self.frames();
        self.partner_positions
            .as_ref()
            .map(|p| p[joint * f + frame])
    }

    pub fn orientation(&self, joint: usize, frame: usize) -> Option<Vec3> {
        let f = self.frames();
        self.joint_orient_dirs
            .as_ref()
            .map(|o| o[joint * f + frame])
    }

    /// All frames of one joint.
    pub fn joint_track(&self, joint: usize) -> &[Vec3] {
        let f = self.frames();
        &self.positions[joint * f..(joint + 1) * f]
    }

    pub fn has_partner(&self) -> bool {
        self.partner_positions.is_some()
    }

    /// Checks every structural and unit-norm invariant.
    pub fn validate(&self) -> Result<()> {
        let f = self.frames();
        let n = self.joints();
        if f < 2 {
            return Err(Error::Contract(format!(
                "recording {}: needs at least 2 frames, has {f}",
                self.id
            )));
        }
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return Err(Error::Contract(format!(
                "recording {}: fps must be positive, got {}",
                self.id, self.fps
            )));
        }
        self.skeleton.validate()?;
        let check_len = |what: &str, len: usize, want: usize| {
            if len != want {
                Err(Error::Contract(format!(
                    "recording {}: {what} has {len} entries, expected {want}",
                    self.id
                )))
            } else {
                Ok(())
            }
        };
        check_len("gaze", self.gaze_dirs.len(), f)?;
        check_len("positions", self.positions.len(), n * f)?;
        if let Some(o) = &self.joint_orient_dirs {
            check_len("orientations", o.len(), n * f)?;
        }
        if let Some(p) = &self.partner_positions {
            check_len("partner positions", p.len(), n * f)?;
        }
        let finite = |v: &Vec3| v.iter().all(|x| x.is_finite());
        let unit = |what: &str, vs: &[Vec3]| -> Result<()> {
            for (i, v) in vs.iter().enumerate() {
                if !finite(v) || (norm(*v) - 1.0).abs() > UNIT_TOLERANCE {
                    return Err(Error::Contract(format!(
                        "recording {}: {what} entry {i} is not a unit vector",
                        self.id
                    )));
                }
            }
            Ok(())
        };
        unit("head", &self.head_dirs)?;
        unit("gaze", &self.gaze_dirs)?;
        if let Some(o) = &self.joint_orient_dirs {
            unit("orientation", o)?;
        }
        let all_finite = |what: &str, vs: &[Vec3]| -> Result<()> {
            match vs.iter().position(|v| !finite(v)) {
                Some(i) => Err(Error::Contract(format!(
                    "recording {}: {what} entry {i} is not finite",
                    self.id
                ))),
                None => Ok(()),
            }
        };
        all_finite("positions", &self.positions)?;
        if let Some(p) = &self.partner_positions {
            all_finite("partner positions", p)?;
        }
        Ok(())
    }

    /// Copy restricted to a contiguous frame range.
    pub fn slice_frames(&self, range: Range<usize>, id: impl Into<String>) -> Result<Recording> {
        let f = self.frames();
        if range.start >= range.end || range.end > f {
            return Err(Error::Parameter(format!(
                "frame range {range:?} invalid for {f} frames"
            )));
        }
        let per_joint = |v: &[Vec3]| -> Vec<Vec3> {
            (0..self.joints())
                .flat_map(|j| v[j * f + range.start..j * f + range.end].iter().copied())
                .collect()
        };
        let rec = Recording {
            id: id.into(),
            skeleton: self.skeleton.clone(),
            fps: self.fps,
            activity: self.activity.clone(),
            positions: per_joint(&self.positions),
            head_dirs: self.head_dirs[range.clone()].to_vec(),
            gaze_dirs: self.gaze_dirs[range.clone()].to_vec(),
            joint_orient_dirs: self.joint_orient_dirs.as_deref().map(per_joint),
            partner_positions: self.partner_positions.as_deref().map(per_joint),
        };
        rec.validate()?;
        Ok(rec)
    }
}

#[cfg(test)]
mod tests {
    use crate::motiondata::synth::{synth_generate, SynthConfig};

    #[test]
    fn slice_keeps_alignment() {
        let cfg = SynthConfig {
            joints: 3,
            frames: 50,
            partner: true,
            ..SynthConfig::default()
        };
        let rec = synth_generate(&cfg, 1).unwrap();
        let s = rec.slice_frames(10..30, "part").unwrap();
        assert_eq!(s.frames(), 20);
        for j in 0..3 {
            for f in 0..20 {
                assert_eq!(s.position(j, f), rec.position(j, f + 10));
                assert_eq!(s.partner_position(j, f), rec.partner_position(j, f + 10));
            }
        }
        assert_eq!(s.gaze_dirs[0], rec.gaze_dirs[10]);
        assert!(rec.slice_frames(10..10, "x").is_err());
    }

    #[test]
    fn validate_rejects_non_unit_gaze() {
        let mut rec = synth_generate(&SynthConfig::default(), 2).unwrap();
        rec.gaze_dirs[3] = [0.9, 0.0, 0.0];
        assert!(rec.validate().is_err());
    }
}
