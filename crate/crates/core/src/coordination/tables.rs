use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::motiondata::vec3::{dot, norm, normalize, sub};
use crate::motiondata::{
    compute_velocity_directions, BodyPart, Recording, SkeletonSpec, Vec3, DEFAULT_EPS_V,
};

/// Per-frame unit directions; `None` marks frames without a defined direction.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DirectionSequence(pub Vec<Option<Vec3>>);

impl DirectionSequence {
    pub fn from_units(dirs: &[Vec3]) -> Self {
        Self(dirs.iter().copied().map(Some).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, t: usize) -> Option<Vec3> {
        self.0.get(t).copied().flatten()
    }
}

/// `a·b / (|a||b|)`, clamped to `[-1, 1]`.
pub fn cosine_similarity(a: Vec3, b: Vec3) -> Result<f64> {
    let (na, nb) = (norm(a), norm(b));
    if na < 1e-12 || nb < 1e-12 {
        return Err(Error::Degenerate(format!(
            "cosine similarity of a zero vector ({a:?}, {b:?})"
        )));
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Activity × joint grid of mean cosine similarities.
///
/// Cells keep raw sums and counts so tables built from disjoint recordings
/// merge exactly regardless of order.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationTable {
    pub name: String,
    pub cols: Vec<String>,
    cells: BTreeMap<String, Vec<(f64, u64)>>,
}

#[derive(Serialize)]
struct TableRowJson<'a> {
    activity: &'a str,
    values: Vec<Option<f64>>,
    counts: Vec<u64>,
    average: Option<f64>,
}

impl CorrelationTable {
    pub fn new(name: impl Into<String>, cols: Vec<String>) -> Self {
        Self {
            name: name.into(),
            cols,
            cells: BTreeMap::new(),
        }
    }

    pub fn add(&mut self, activity: &str, col: usize, value: f64) {
        let n = self.cols.len();
        let row = self
            .cells
            .entry(activity.to_string())
            .or_insert_with(|| vec![(0.0, 0); n]);
        row[col].0 += value;
        row[col].1 += 1;
    }

    pub fn merge(&mut self, other: &CorrelationTable) -> Result<()> {
        if self.cols != other.cols {
            return Err(Error::Analysis(format!(
                "cannot merge tables with different columns ({} vs {})",
                self.cols.len(),
                other.cols.len()
            )));
        }
        let n = self.cols.len();
        for (act, row) in &other.cells {
            let dst = self
                .cells
                .entry(act.clone())
                .or_insert_with(|| vec![(0.0, 0); n]);
            for (d, s) in dst.iter_mut().zip(row) {
                d.0 += s.0;
                d.1 += s.1;
            }
        }
        Ok(())
    }

    /// Activity labels in sorted order.
    pub fn rows(&self) -> Vec<&str> {
        self.cells.keys().map(String::as_str).collect()
    }

    pub fn col_index(&self, joint: &str) -> Option<usize> {
        self.cols.iter().position(|c| c == joint)
    }

    pub fn value(&self, activity: &str, col: usize) -> Option<f64> {
        let (s, c) = *self.cells.get(activity)?.get(col)?;
        (c > 0).then(|| s / c as f64)
    }

    pub fn count(&self, activity: &str, col: usize) -> u64 {
        self.cells
            .get(activity)
            .and_then(|r| r.get(col))
            .map_or(0, |c| c.1)
    }

    /// Count-weighted mean over all joint columns of one activity.
    pub fn average(&self, activity: &str) -> Option<f64> {
        let row = self.cells.get(activity)?;
        let (s, c) = row
            .iter()
            .fold((0.0, 0), |acc, x| (acc.0 + x.0, acc.1 + x.1));
        (c > 0).then(|| s / c as f64)
    }

    /// Header `activity,<joints…>,Average`; empty cells are left blank.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("activity");
        for c in &self.cols {
            out.push(',');
            out.push_str(c);
        }
        out.push_str(",Average\n");
        let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for act in self.cells.keys() {
            out.push_str(act);
            for j in 0..self.cols.len() {
                out.push(',');
                out.push_str(&fmt(self.value(act, j)));
            }
            out.push(',');
            out.push_str(&fmt(self.average(act)));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<TableRowJson> = self
            .cells
            .keys()
            .map(|act| TableRowJson {
                activity: act,
                values: (0..self.cols.len()).map(|j| self.value(act, j)).collect(),
                counts: (0..self.cols.len()).map(|j| self.count(act, j)).collect(),
                average: self.average(act),
            })
            .collect();
        serde_json::json!({ "name": self.name, "columns": self.cols, "rows": rows })
    }
}

fn resolve_joints(rec: &Recording, names: &[String]) -> Result<Vec<usize>> {
    names
        .iter()
        .map(|n| {
            rec.skeleton.index_of(n).ok_or_else(|| {
                Error::Analysis(format!("recording {} has no joint named '{n}'", rec.id))
            })
        })
        .collect()
}

fn default_columns(recordings: &[Recording]) -> Result<Vec<String>> {
    recordings
        .first()
        .map(|r| r.skeleton.joints.clone())
        .ok_or_else(|| Error::Analysis("no recordings to analyze".into()))
}

/// Mean cosine similarity between gaze and each joint's forward direction.
/// `joints` selects columns by name; `None` uses every joint of the first
/// recording's skeleton.
pub fn gaze_orientation_table(
    recordings: &[Recording],
    joints: Option<&[String]>,
) -> Result<CorrelationTable> {
    let cols = match joints {
        Some(j) => j.to_vec(),
        None => default_columns(recordings)?,
    };
    let mut table = CorrelationTable::new("gaze_body_orientation", cols.clone());
    for rec in recordings {
        if rec.joint_orient_dirs.is_none() {
            return Err(Error::Analysis(format!(
                "recording {} has no joint orientation channel",
                rec.id
            )));
        }
        let idx = resolve_joints(rec, &cols)?;
        for (c, &j) in idx.iter().enumerate() {
            for f in 0..rec.frames() {
                let o = rec.orientation(j, f).expect("checked above");
                table.add(&rec.activity, c, cosine_similarity(rec.gaze_dirs[f], o)?);
            }
        }
    }
    Ok(table)
}

/// Mean cosine similarity between gaze at `t` and each joint's motion
/// direction from `t` to `t + 1`; stationary steps are skipped.
pub fn gaze_motion_table(recordings: &[Recording]) -> Result<CorrelationTable> {
    let cols = default_columns(recordings)?;
    let mut table = CorrelationTable::new("gaze_body_motion", cols.clone());
    for rec in recordings {
        let idx = resolve_joints(rec, &cols)?;
        let vel =
            compute_velocity_directions(&rec.positions, rec.joints(), rec.frames(), DEFAULT_EPS_V)?;
        for (c, &j) in idx.iter().enumerate() {
            for t in 0..vel.steps {
                if let Some(d) = vel.get(j, t) {
                    table.add(&rec.activity, c, cosine_similarity(rec.gaze_dirs[t], d)?);
                }
            }
        }
    }
    Ok(table)
}

/// Mean cosine similarity between gaze and the direction from each own
/// joint to the partner's same-named joint.
pub fn interbody_direction_table(recordings: &[Recording]) -> Result<CorrelationTable> {
    let cols = default_columns(recordings)?;
    let mut table = CorrelationTable::new("gaze_two_body_motion", cols.clone());
    for rec in recordings {
        if !rec.has_partner() {
            return Err(Error::Analysis(format!(
                "recording {} has no interaction partner",
                rec.id
            )));
        }
        let idx = resolve_joints(rec, &cols)?;
        for (c, &j) in idx.iter().enumerate() {
            for f in 0..rec.frames() {
                let p = rec.partner_position(j, f).expect("checked above");
                if let Some(d) = normalize(sub(p, rec.position(j, f)), DEFAULT_EPS_V) {
                    table.add(&rec.activity, c, cosine_similarity(rec.gaze_dirs[f], d)?);
                }
            }
        }
    }
    Ok(table)
}

/// Per-activity means of joint values grouped by body part.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PartSummary {
    pub rows: BTreeMap<String, BTreeMap<BodyPart, f64>>,
}

impl PartSummary {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("activity,part,mean\n");
        for (act, parts) in &self.rows {
            for (p, v) in parts {
                out.push_str(&format!("{act},{p},{v}\n"));
            }
        }
        out
    }
}

/// Unweighted mean of the joint cells belonging to each body part. Parts
/// without any populated cell are omitted from that activity's row.
pub fn bodypart_summary(table: &CorrelationTable, skeleton: &SkeletonSpec) -> Result<PartSummary> {
    let mut part_cols: BTreeMap<BodyPart, Vec<usize>> = BTreeMap::new();
    for (part, joints) in &skeleton.parts {
        for j in joints {
            let c = table.col_index(j).ok_or_else(|| {
                Error::Contract(format!(
                    "joint '{j}' is not a column of table {}",
                    table.name
                ))
            })?;
            part_cols.entry(*part).or_default().push(c);
        }
    }
    let mut rows = BTreeMap::new();
    for act in table.rows() {
        let mut parts = BTreeMap::new();
        for (part, cols) in &part_cols {
            let vals: Vec<f64> = cols.iter().filter_map(|&c| table.value(act, c)).collect();
            if !vals.is_empty() {
                parts.insert(*part, vals.iter().sum::<f64>() / vals.len() as f64);
            }
        }
        rows.insert(act.to_string(), parts);
    }
    Ok(PartSummary { rows })
}
