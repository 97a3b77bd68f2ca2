use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motiondata::vec3::{cross, dot, normalize};
use crate::motiondata::{Recording, Vec3};

/// Vertical axis of the world frame used to build head frames.
pub const DEFAULT_WORLD_UP: Vec3 = [0.0, 0.0, 1.0];

/// Horizontal and vertical visual angle (degrees) of `gaze` in the head
/// frame spanned by `head_forward` and `world_up`.
pub fn gaze_in_head_angles(gaze: Vec3, head_forward: Vec3, world_up: Vec3) -> Result<(f64, f64)> {
    let right = normalize(cross(head_forward, world_up), 1e-6).ok_or_else(|| {
        Error::Degenerate(format!(
            "head direction {head_forward:?} is parallel to the up vector"
        ))
    })?;
    let up = cross(right, head_forward);
    let fwd = dot(gaze, head_forward);
    Ok((
        dot(gaze, right).atan2(fwd).to_degrees(),
        dot(gaze, up).atan2(fwd).to_degrees(),
    ))
}

/// Visual angles for every frame of a recording; frames whose head frame
/// is undefined are skipped and counted.
pub fn gaze_in_head_series(rec: &Recording, world_up: Vec3) -> (Vec<[f64; 2]>, usize) {
    let mut skipped = 0;
    let angles = rec
        .gaze_dirs
        .iter()
        .zip(&rec.head_dirs)
        .filter_map(|(g, h)| match gaze_in_head_angles(*g, *h, world_up) {
            Ok((a, b)) => Some([a, b]),
            Err(_) => {
                skipped += 1;
                None
            }
        })
        .collect();
    (angles, skipped)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub h_range: (f64, f64),
    pub v_range: (f64, f64),
    pub cell_deg: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            h_range: (-60.0, 60.0),
            v_range: (-45.0, 45.0),
            cell_deg: 1.0,
        }
    }
}

impl GridConfig {
    fn cells(&self) -> Result<(usize, usize)> {
        let span = |r: (f64, f64)| (r.1 - r.0) / self.cell_deg;
        let (h, v) = (span(self.h_range), span(self.v_range));
        let ok = self.cell_deg > 0.0 && h.is_finite() && v.is_finite() && h >= 1.0 && v >= 1.0;
        if !ok {
            return Err(Error::Parameter(format!("invalid gaze grid {self:?}")));
        }
        Ok((h.round() as usize, v.round() as usize))
    }
}

/// Smoothed 2D histogram of visual angles. `density` is row-major with
/// `nv` rows (vertical, ascending) of `nh` cells (horizontal, ascending).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GazeFieldGrid {
    pub h_range: (f64, f64),
    pub v_range: (f64, f64),
    pub cell_deg: f64,
    pub nh: usize,
    pub nv: usize,
    pub density: Vec<f64>,
    pub total: f64,
    /// Samples that fell outside the grid and were binned into an edge cell.
    pub clamped: usize,
}

impl GazeFieldGrid {
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.density[row * self.nh + col]
    }

    /// Cell containing the angle pair, clamped to the grid.
    pub fn cell_of(&self, h: f64, v: f64) -> (usize, usize) {
        let idx = |x: f64, lo: f64, n: usize| {
            let i = ((x - lo) / self.cell_deg).floor();
            i.clamp(0.0, n as f64 - 1.0) as usize
        };
        (
            idx(v, self.v_range.0, self.nv),
            idx(h, self.h_range.0, self.nh),
        )
    }

    /// One CSV row per vertical cell; the first column is the cell's lower
    /// vertical edge and the header lists the horizontal edges.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("v_deg");
        for c in 0..self.nh {
            out.push_str(&format!(",{}", self.h_range.0 + c as f64 * self.cell_deg));
        }
        out.push('\n');
        for r in 0..self.nv {
            out.push_str(&(self.v_range.0 + r as f64 * self.cell_deg).to_string());
            for c in 0..self.nh {
                out.push_str(&format!(",{}", self.at(r, c)));
            }
            out.push('\n');
        }
        out
    }
}

/// Normalized Gaussian taps for offsets `-r..=r` cells, truncated at 4σ.
fn gaussian_kernel(sigma_cells: f64) -> Vec<f64> {
    if sigma_cells == 0.0 {
        return vec![1.0];
    }
    let r = (4.0 * sigma_cells).ceil() as i64;
    let w: Vec<f64> = (-r..=r)
        .map(|d| (-(d * d) as f64 / (2.0 * sigma_cells * sigma_cells)).exp())
        .collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

fn convolve_axis(src: &[f64], rows: usize, cols: usize, k: &[f64], along_rows: bool) -> Vec<f64> {
    let r = (k.len() / 2) as i64;
    let mut out = vec![0.0; src.len()];
    for i in 0..rows {
        for j in 0..cols {
            let v = src[i * cols + j];
            if v == 0.0 {
                continue;
            }
            for (o, w) in k.iter().enumerate() {
                let d = o as i64 - r;
                let (ti, tj) = if along_rows {
                    (i as i64 + d, j as i64)
                } else {
                    (i as i64, j as i64 + d)
                };
                if ti >= 0 && tj >= 0 && (ti as usize) < rows && (tj as usize) < cols {
                    out[ti as usize * cols + tj as usize] += v * w;
                }
            }
        }
    }
    out
}

/// Histogram of `(h, v)` samples smoothed by an isotropic Gaussian of
/// `sigma_deg`, rescaled afterwards so the total equals the sample count.
pub fn smoothed_distribution(
    angles: &[[f64; 2]],
    grid: &GridConfig,
    sigma_deg: f64,
) -> Result<GazeFieldGrid> {
    let (nh, nv) = grid.cells()?;
    if !(sigma_deg >= 0.0 && sigma_deg.is_finite()) {
        return Err(Error::Parameter(format!(
            "sigma must be non-negative, got {sigma_deg}"
        )));
    }
    let mut out = GazeFieldGrid {
        h_range: grid.h_range,
        v_range: grid.v_range,
        cell_deg: grid.cell_deg,
        nh,
        nv,
        density: vec![0.0; nh * nv],
        total: 0.0,
        clamped: 0,
    };
    for &[h, v] in angles {
        if !(h.is_finite() && v.is_finite()) {
            return Err(Error::Parameter(format!(
                "non-finite visual angle ({h}, {v})"
            )));
        }
        let outside =
            h < grid.h_range.0 || h >= grid.h_range.1 || v < grid.v_range.0 || v >= grid.v_range.1;
        out.clamped += outside as usize;
        let (r, c) = out.cell_of(h, v);
        out.density[r * nh + c] += 1.0;
    }
    let k = gaussian_kernel(sigma_deg / grid.cell_deg);
    let rows = convolve_axis(&out.density, nv, nh, &k, false);
    let mut dens = convolve_axis(&rows, nv, nh, &k, true);
    let mass: f64 = dens.iter().sum();
    if mass > 0.0 {
        let s = angles.len() as f64 / mass;
        dens.iter_mut().for_each(|d| *d *= s);
    }
    out.total = dens.iter().sum();
    out.density = dens;
    Ok(out)
}
