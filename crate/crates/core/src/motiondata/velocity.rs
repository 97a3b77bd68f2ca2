use super::vec3::{normalize, sub, Vec3};
use crate::error::{Error, Result};

/// Displacements shorter than this (metres per frame) count as stationary.
pub const DEFAULT_EPS_V: f64 = 1e-6;

/// Per-joint motion directions between consecutive frames, joint-major
/// (`joint * steps + t`), with stationary steps masked out.
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityDirections {
    pub joints: usize,
    pub steps: usize,
    pub dirs: Vec<Vec3>,
    pub valid: Vec<bool>,
}

impl VelocityDirections {
    pub fn get(&self, joint: usize, t: usize) -> Option<Vec3> {
        let i = joint * self.steps + t;
        self.valid[i].then_some(self.dirs[i])
    }

    /// Directions of one joint with invalid steps as `None`.
    pub fn joint(&self, joint: usize) -> Vec<Option<Vec3>> {
        (0..self.steps).map(|t| self.get(joint, t)).collect()
    }
}

/// `normalize(p[j, t+1] - p[j, t])` for every joint and step. `positions`
/// is joint-major with `frames` entries per joint.
pub fn compute_velocity_directions(
    positions: &[Vec3],
    joints: usize,
    frames: usize,
    eps_v: f64,
) -> Result<VelocityDirections> {
    if frames < 2 {
        return Err(Error::Parameter(format!(
            "velocity directions need at least 2 frames, got {frames}"
        )));
    }
    if positions.len() != joints * frames {
        return Err(Error::Dimension(format!(
            "{} positions for {joints} joints × {frames} frames",
            positions.len()
        )));
    }
    let steps = frames - 1;
    let mut dirs = Vec::with_capacity(joints * steps);
    let mut valid = Vec::with_capacity(joints * steps);
    for j in 0..joints {
        let track = &positions[j * frames..(j + 1) * frames];
        for w in track.windows(2) {
            match normalize(sub(w[1], w[0]), eps_v) {
                Some(d) => {
                    dirs.push(d);
                    valid.push(true);
                }
                None => {
                    dirs.push([0.0; 3]);
                    valid.push(false);
                }
            }
        }
    }
    Ok(VelocityDirections {
        joints,
        steps,
        dirs,
        valid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_x_motion() {
        let pos: Vec<Vec3> = (0..10).map(|f| [f as f64 * 0.1, 1.0, 2.0]).collect();
        let v = compute_velocity_directions(&pos, 1, 10, DEFAULT_EPS_V).unwrap();
        assert_eq!(v.steps, 9);
        assert!(v.valid.iter().all(|&b| b));
        for d in &v.dirs {
            assert!((d[0] - 1.0).abs() < 1e-12 && d[1].abs() < 1e-12 && d[2].abs() < 1e-12);
        }
    }

    #[test]
    fn stationary_joint_masked() {
        let pos = vec![[0.5, 0.5, 0.5]; 8];
        let v = compute_velocity_directions(&pos, 1, 8, DEFAULT_EPS_V).unwrap();
        assert!(v.valid.iter().all(|&b| !b));
        assert!(v.joint(0).iter().all(Option::is_none));
    }

    #[test]
    fn single_frame_rejected() {
        assert!(compute_velocity_directions(&[[0.0; 3]], 1, 1, DEFAULT_EPS_V).is_err());
    }
}
