use serde::Serialize;

use super::stats::spearman;
use super::tables::{cosine_similarity, DirectionSequence};
use crate::error::{Error, Result};
use crate::motiondata::{compute_velocity_directions, Recording, DEFAULT_EPS_V};

/// A statistic evaluated at integer frame lags, labelled in milliseconds.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LagCurve {
    pub lags_frames: Vec<i64>,
    pub lags_ms: Vec<f64>,
    pub values: Vec<f64>,
    pub peak_lag_frames: i64,
    pub peak_lag_ms: f64,
}

impl LagCurve {
    /// Builds the curve and locates its maximum; among equal maxima the lag
    /// closest to zero wins, and the negative one if both signs tie.
    pub fn from_values(lags_frames: Vec<i64>, values: Vec<f64>, fps: f64) -> Self {
        let mut best = 0;
        for i in 1..values.len() {
            let (v, b) = (values[i], values[best]);
            let closer = lags_frames[i].abs() < lags_frames[best].abs();
            if v > b || (v == b && closer) {
                best = i;
            }
        }
        let ms = |k: i64| k as f64 * 1000.0 / fps;
        Self {
            lags_ms: lags_frames.iter().map(|&k| ms(k)).collect(),
            peak_lag_frames: lags_frames[best],
            peak_lag_ms: ms(lags_frames[best]),
            lags_frames,
            values,
        }
    }

    pub fn peak_value(&self) -> f64 {
        let i = self
            .lags_frames
            .iter()
            .position(|&k| k == self.peak_lag_frames)
            .expect("peak is one of the lags");
        self.values[i]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("lag_frames,lag_ms,value\n");
        for ((k, ms), v) in self.lags_frames.iter().zip(&self.lags_ms).zip(&self.values) {
            out.push_str(&format!("{k},{ms},{v}\n"));
        }
        out
    }
}

fn frame_lags(lag_range_ms: (f64, f64), fps: f64) -> Result<Vec<i64>> {
    if !(fps > 0.0 && fps.is_finite()) {
        return Err(Error::Parameter(format!("fps must be positive, got {fps}")));
    }
    let lo = (lag_range_ms.0 * fps / 1000.0 - 1e-9).ceil() as i64;
    let hi = (lag_range_ms.1 * fps / 1000.0 + 1e-9).floor() as i64;
    if lo > hi {
        return Err(Error::Parameter(format!(
            "lag range {lag_range_ms:?} ms contains no whole frame at {fps} fps"
        )));
    }
    Ok((lo..=hi).collect())
}

/// Index range of `t` such that both `t` and `t + k` are in bounds.
fn overlap(len_a: usize, len_b: usize, k: i64) -> Result<std::ops::Range<usize>> {
    let start = (-k).max(0) as usize;
    let end = (len_a as i64).min(len_b as i64 - k).max(0) as usize;
    if end < start + 2 {
        return Err(Error::Analysis(format!(
            "lag {k} frames leaves fewer than 2 overlapping frames"
        )));
    }
    Ok(start..end)
}

/// Mean cosine similarity between `gaze(t)` and `signal(t + k)` for every
/// whole-frame lag `k` inside `lag_range_ms`. Several signals (one per
/// joint) are swept separately and their curves averaged.
pub fn lag_sweep(
    gaze: &DirectionSequence,
    signals: &[DirectionSequence],
    lag_range_ms: (f64, f64),
    fps: f64,
) -> Result<LagCurve> {
    if signals.is_empty() {
        return Err(Error::Analysis(
            "lag sweep needs at least one signal".into(),
        ));
    }
    let lags = frame_lags(lag_range_ms, fps)?;
    let mut values = Vec::with_capacity(lags.len());
    for &k in &lags {
        let mut curve_sum = 0.0;
        let mut curves = 0usize;
        for s in signals {
            let range = overlap(gaze.len(), s.len(), k)?;
            let (mut sum, mut n) = (0.0, 0usize);
            for t in range {
                if let (Some(g), Some(d)) = (gaze.get(t), s.get((t as i64 + k) as usize)) {
                    sum += cosine_similarity(g, d)?;
                    n += 1;
                }
            }
            if n > 0 {
                curve_sum += sum / n as f64;
                curves += 1;
            }
        }
        if curves == 0 {
            return Err(Error::Analysis(format!(
                "no valid direction pairs at lag {k} frames"
            )));
        }
        values.push(curve_sum / curves as f64);
    }
    Ok(LagCurve::from_values(lags, values, fps))
}

/// Spearman correlation between `gaze_amp(t)` and `body_amp(t + k)` per lag.
pub fn amplitude_lag_correlation(
    gaze_amp: &[f64],
    body_amp: &[f64],
    lag_range_ms: (f64, f64),
    fps: f64,
) -> Result<LagCurve> {
    let lags = frame_lags(lag_range_ms, fps)?;
    let mut values = Vec::with_capacity(lags.len());
    for &k in &lags {
        let range = overlap(gaze_amp.len(), body_amp.len(), k)?;
        let shifted = (range.start as i64 + k) as usize..(range.end as i64 + k) as usize;
        values.push(spearman(&gaze_amp[range], &body_amp[shifted])?);
    }
    Ok(LagCurve::from_values(lags, values, fps))
}

/// Gaze versus head direction of one recording.
pub fn head_lag_curve(rec: &Recording, lag_range_ms: (f64, f64)) -> Result<LagCurve> {
    lag_sweep(
        &DirectionSequence::from_units(&rec.gaze_dirs),
        &[DirectionSequence::from_units(&rec.head_dirs)],
        lag_range_ms,
        rec.fps,
    )
}

/// Gaze versus joint motion directions, averaged over `joints` (all joints
/// when `None`).
pub fn motion_lag_curve(
    rec: &Recording,
    joints: Option<&[usize]>,
    lag_range_ms: (f64, f64),
) -> Result<LagCurve> {
    let vel =
        compute_velocity_directions(&rec.positions, rec.joints(), rec.frames(), DEFAULT_EPS_V)?;
    let all: Vec<usize> = (0..rec.joints()).collect();
    let signals: Vec<DirectionSequence> = joints
        .unwrap_or(&all)
        .iter()
        .map(|&j| DirectionSequence(vel.joint(j)))
        .collect();
    lag_sweep(
        &DirectionSequence::from_units(&rec.gaze_dirs),
        &signals,
        lag_range_ms,
        rec.fps,
    )
}
