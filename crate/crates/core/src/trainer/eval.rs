use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::Pose2Gaze;
use crate::motiondata::{SampleWindow, Setting};
use crate::ndops::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ActivityError {
    pub mean_deg: f64,
    pub windows: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WindowError {
    pub recording: String,
    pub activity: String,
    pub anchor: usize,
    pub error_deg: f64,
}

/// Mean angular errors of one method, per activity and overall.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub method: String,
    pub setting: Option<Setting>,
    pub per_activity: BTreeMap<String, ActivityError>,
    pub overall_deg: f64,
    pub windows: usize,
    /// Paired per-window errors for external significance tests.
    pub per_window: Vec<WindowError>,
}

impl EvalReport {
    pub fn from_errors(
        method: &str,
        setting: Option<Setting>,
        per_window: Vec<WindowError>,
    ) -> Self {
        let mut acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
        for w in &per_window {
            let e = acc.entry(w.activity.clone()).or_default();
            e.0 += w.error_deg;
            e.1 += 1;
        }
        let total: f64 = acc.values().map(|a| a.0).sum();
        let n = per_window.len();
        Self {
            method: method.to_string(),
            setting,
            per_activity: acc
                .into_iter()
                .map(|(k, (s, c))| {
                    (
                        k,
                        ActivityError {
                            mean_deg: s / c as f64,
                            windows: c,
                        },
                    )
                })
                .collect(),
            overall_deg: if n > 0 { total / n as f64 } else { f64::NAN },
            windows: n,
            per_window,
        }
    }

    /// `method,setting,activity,mean_deg,windows` rows plus an `all` row.
    pub fn summary_csv_rows(&self) -> String {
        let setting = self.setting.map(|s| s.to_string()).unwrap_or_default();
        let mut out = String::new();
        for (act, e) in &self.per_activity {
            out.push_str(&format!(
                "{},{setting},{act},{},{}\n",
                self.method, e.mean_deg, e.windows
            ));
        }
        out.push_str(&format!(
            "{},{setting},all,{},{}\n",
            self.method, self.overall_deg, self.windows
        ));
        out
    }

    pub fn summary_csv(&self) -> String {
        format!(
            "method,setting,activity,mean_deg,windows\n{}",
            self.summary_csv_rows()
        )
    }

    pub fn per_window_csv(&self) -> String {
        let mut out = String::from("recording,activity,anchor,error_deg\n");
        for w in &self.per_window {
            out.push_str(&format!(
                "{},{},{},{}\n",
                w.recording, w.activity, w.anchor, w.error_deg
            ));
        }
        out
    }
}

/// Mean angle in degrees between matching columns of two `3×T` tensors.
pub fn window_error_deg(pred: &Tensor, target: &Tensor) -> Result<f64> {
    if pred.shape() != target.shape() || pred.rank() != 2 || pred.shape()[0] != 3 {
        return Err(Error::Dimension(format!(
            "angular error needs matching 3×T inputs, got {:?} and {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    let t = pred.shape()[1];
    let sum: f64 = (0..t)
        .map(|j| {
            let d: f64 = (0..3).map(|r| pred.at2(r, j) * target.at2(r, j)).sum();
            d.clamp(-1.0, 1.0).acos().to_degrees()
        })
        .sum();
    Ok(sum / t as f64)
}

/// Evaluates an arbitrary predictor over `windows` (in parallel, results in
/// window order).
pub fn evaluate_with<F>(predict: F, windows: &[SampleWindow], method: &str) -> Result<EvalReport>
where
    F: Fn(&SampleWindow) -> Result<Tensor> + Sync,
{
    let per_window = windows
        .par_iter()
        .map(|w| {
            let pred = predict(w)?;
            Ok(WindowError {
                recording: w.source.recording.clone(),
                activity: w.source.activity.clone(),
                anchor: w.source.anchor,
                error_deg: window_error_deg(&pred, &w.gaze_target)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::from_errors(
        method,
        windows.first().map(|w| w.setting),
        per_window,
    ))
}

/// Evaluation-mode errors of `model` on `windows`.
pub fn evaluate(model: &Pose2Gaze, windows: &[SampleWindow], method: &str) -> Result<EvalReport> {
    evaluate_with(|w| model.predict(w), windows, method)
}

/// Head direction as the gaze estimate. For the past setting the last
/// observed head direction is held over the whole horizon.
pub fn head_direction_baseline(window: &SampleWindow) -> Tensor {
    let h = &window.head_in;
    let t = h.shape()[1];
    match window.setting {
        Setting::Past => Tensor::from_fn(&[3, t], |i| h.at2(i / t, t - 1)),
        Setting::Present | Setting::Future => h.clone(),
    }
}
