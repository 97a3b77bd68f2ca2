//! Recording manifests: a JSON header next to per-channel CSV files.
//!
//! ```text
//! manifest.json          {version, id?, skeleton, fps, frames, activity, files}
//! positions.csv          frame,joint,x,y,z
//! head.csv, gaze.csv     frame,x,y,z
//! orientations.csv       frame,joint,x,y,z   (optional)
//! partner_positions.csv  frame,joint,x,y,z   (optional)
//! ```
//!
//! Rows are strictly increasing by `(frame, joint)` and cover every pair.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::recording::Recording;
use super::skeleton::SkeletonSpec;
use super::vec3::{norm, scale, Vec3};
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;

pub const MANIFEST_VERSION: u32 = 1;

/// Vectors whose norm is off by more than this are rejected on load.
pub const LOAD_NORM_REJECT: f64 = 1e-3;
/// Vectors off by more than this (but within the reject bound) are rescaled.
const LOAD_NORM_RESCALE: f64 = 1e-9;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SkeletonRef {
    Named(String),
    Inline(SkeletonSpec),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ManifestFiles {
    pub positions: String,
    pub head: String,
    pub gaze: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orientations: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partner_positions: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub skeleton: SkeletonRef,
    pub fps: f64,
    pub frames: usize,
    pub activity: String,
    pub files: ManifestFiles,
}

fn default_id(path: &Path) -> String {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("recording");
    if stem == "manifest" {
        if let Some(dir) = path
            .parent()
            .and_then(|p| p.file_name())
            .and_then(|s| s.to_str())
        {
            return dir.to_string();
        }
    }
    stem.to_string()
}

/// Reads and validates a recording from its manifest.
pub fn load_recording(path: &Path) -> Result<Recording> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| Error::load(path, format!("manifest: {e}")))?;
    if manifest.version != MANIFEST_VERSION {
        return Err(Error::load(
            path,
            format!("unsupported manifest version {}", manifest.version),
        ));
    }
    let skeleton = match &manifest.skeleton {
        SkeletonRef::Named(name) => {
            SkeletonSpec::by_name(name).map_err(|e| Error::load(path, e.to_string()))?
        }
        SkeletonRef::Inline(spec) => {
            spec.validate()
                .map_err(|e| Error::load(path, e.to_string()))?;
            spec.clone()
        }
    };
    let frames = manifest.frames;
    if frames < 2 {
        return Err(Error::load(
            path,
            format!("frames = {frames}, need at least 2"),
        ));
    }
    let n = skeleton.len();
    let dir = path.parent().unwrap_or(Path::new("."));
    let resolve = |name: &str| dir.join(name);

    let positions = read_joint_csv(&resolve(&manifest.files.positions), frames, n)?;
    let head_dirs = unit_channel(
        read_frame_csv(&resolve(&manifest.files.head), frames)?,
        &resolve(&manifest.files.head),
        None,
    )?;
    let gaze_dirs = unit_channel(
        read_frame_csv(&resolve(&manifest.files.gaze), frames)?,
        &resolve(&manifest.files.gaze),
        None,
    )?;
    let joint_orient_dirs = match &manifest.files.orientations {
        Some(name) => {
            let p = resolve(name);
            Some(unit_channel(
                read_joint_csv(&p, frames, n)?,
                &p,
                Some(frames),
            )?)
        }
        None => None,
    };
    let partner_positions = match &manifest.files.partner_positions {
        Some(name) => Some(read_joint_csv(&resolve(name), frames, n)?),
        None => None,
    };
    let rec = Recording {
        id: manifest.id.clone().unwrap_or_else(|| default_id(path)),
        skeleton,
        fps: manifest.fps,
        activity: manifest.activity.clone(),
        positions,
        head_dirs,
        gaze_dirs,
        joint_orient_dirs,
        partner_positions,
    };
    rec.validate()
        .map_err(|e| Error::load(path, e.to_string()))?;
    Ok(rec)
}

/// Rescales slightly-off unit vectors, rejects badly-off ones. `frames` is
/// set for joint-major channels so errors can name the frame.
fn unit_channel(mut vs: Vec<Vec3>, path: &Path, frames: Option<usize>) -> Result<Vec<Vec3>> {
    for (i, v) in vs.iter_mut().enumerate() {
        let n = norm(*v);
        let dev = (n - 1.0).abs();
        if dev > LOAD_NORM_REJECT {
            let where_ = match frames {
                Some(f) => format!("frame {} joint {}", i % f, i / f),
                None => format!("frame {i}"),
            };
            return Err(Error::load(
                path,
                format!(
                    "{where_}: vector norm {n} deviates from 1 by more than {LOAD_NORM_REJECT}"
                ),
            ));
        }
        if dev > LOAD_NORM_RESCALE {
            *v = scale(*v, 1.0 / n);
        }
    }
    Ok(vs)
}

fn parse_field(path: &Path, row: usize, rec: &csv::StringRecord, idx: usize) -> Result<f64> {
    let raw = rec
        .get(idx)
        .ok_or_else(|| Error::load(path, format!("row {row}: missing column {idx}")))?;
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|_| Error::load(path, format!("row {row}: '{raw}' is not a number")))?;
    if !v.is_finite() {
        return Err(Error::load(
            path,
            format!("row {row}: non-finite value '{raw}'"),
        ));
    }
    Ok(v)
}

fn parse_index(path: &Path, row: usize, rec: &csv::StringRecord, idx: usize) -> Result<usize> {
    let raw = rec
        .get(idx)
        .ok_or_else(|| Error::load(path, format!("row {row}: missing column {idx}")))?;
    raw.trim()
        .parse()
        .map_err(|_| Error::load(path, format!("row {row}: '{raw}' is not an index")))
}

fn open_csv(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::load(path, format!("missing channel: {io}")),
            other => Error::load(path, format!("{other:?}")),
        })
}

/// `frame,x,y,z` rows, one per frame.
fn read_frame_csv(path: &Path, frames: usize) -> Result<Vec<Vec3>> {
    let mut reader = open_csv(path)?;
    let mut out = Vec::with_capacity(frames);
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::load(path, e.to_string()))?;
        let frame = parse_index(path, row, &rec, 0)?;
        if frame != out.len() {
            return Err(Error::load(
                path,
                format!(
                    "row {row}: expected frame {}, found frame {frame}",
                    out.len()
                ),
            ));
        }
        if frame >= frames {
            return Err(Error::load(
                path,
                format!("frame {frame} exceeds the declared {frames} frames"),
            ));
        }
        out.push([
            parse_field(path, row, &rec, 1)?,
            parse_field(path, row, &rec, 2)?,
            parse_field(path, row, &rec, 3)?,
        ]);
    }
    if out.len() != frames {
        return Err(Error::load(
            path,
            format!(
                "frame-count mismatch: {} rows for {frames} frames",
                out.len()
            ),
        ));
    }
    Ok(out)
}

/// `frame,joint,x,y,z` rows ordered by `(frame, joint)`; returned joint-major.
fn read_joint_csv(path: &Path, frames: usize, joints: usize) -> Result<Vec<Vec3>> {
    let mut reader = open_csv(path)?;
    let mut out = vec![[0.0; 3]; frames * joints];
    let mut count = 0usize;
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::load(path, e.to_string()))?;
        let frame = parse_index(path, row, &rec, 0)?;
        let joint = parse_index(path, row, &rec, 1)?;
        let (ef, ej) = (count / joints.max(1), count % joints.max(1));
        if frame >= frames {
            return Err(Error::load(
                path,
                format!("frame {frame} exceeds the declared {frames} frames"),
            ));
        }
        if (frame, joint) != (ef, ej) {
            return Err(Error::load(
                path,
                format!(
                    "row {row}: expected frame {ef} joint {ej}, found frame {frame} joint {joint}"
                ),
            ));
        }
        out[joint * frames + frame] = [
            parse_field(path, row, &rec, 2)?,
            parse_field(path, row, &rec, 3)?,
            parse_field(path, row, &rec, 4)?,
        ];
        count += 1;
    }
    if count != frames * joints {
        return Err(Error::load(
            path,
            format!("frame-count mismatch: {count} rows for {frames} frames × {joints} joints"),
        ));
    }
    Ok(out)
}

fn frame_csv(vs: &[Vec3]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Contract(format!("csv encoding: {e}"));
    w.write_record(["frame", "x", "y", "z"]).map_err(err)?;
    for (f, v) in vs.iter().enumerate() {
        w.write_record([
            f.to_string(),
            v[0].to_string(),
            v[1].to_string(),
            v[2].to_string(),
        ])
        .map_err(err)?;
    }
    w.into_inner().map_err(|e| Error::Contract(e.to_string()))
}

fn joint_csv(vs: &[Vec3], frames: usize, joints: usize) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Contract(format!("csv encoding: {e}"));
    w.write_record(["frame", "joint", "x", "y", "z"])
        .map_err(err)?;
    for f in 0..frames {
        for j in 0..joints {
            let v = vs[j * frames + f];
            w.write_record([
                f.to_string(),
                j.to_string(),
                v[0].to_string(),
                v[1].to_string(),
                v[2].to_string(),
            ])
            .map_err(err)?;
        }
    }
    w.into_inner().map_err(|e| Error::Contract(e.to_string()))
}

/// Writes `rec` as a manifest at `path` plus sibling CSV files.
pub fn save_recording(rec: &Recording, path: &Path) -> Result<()> {
    rec.validate()?;
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (f, n) = (rec.frames(), rec.joints());
    let builtin = matches!(rec.skeleton.name.as_str(), "mogaze21" | "gimo23")
        && SkeletonSpec::by_name(&rec.skeleton.name).ok().as_ref() == Some(&rec.skeleton);
    let skeleton = if builtin {
        SkeletonRef::Named(rec.skeleton.name.clone())
    } else {
        SkeletonRef::Inline(rec.skeleton.clone())
    };
    let files = ManifestFiles {
        positions: "positions.csv".into(),
        head: "head.csv".into(),
        gaze: "gaze.csv".into(),
        orientations: rec
            .joint_orient_dirs
            .as_ref()
            .map(|_| "orientations.csv".into()),
        partner_positions: rec
            .partner_positions
            .as_ref()
            .map(|_| "partner_positions.csv".into()),
    };
    let out: PathBuf = dir.to_path_buf();
    write_atomic(
        &out.join(&files.positions),
        &joint_csv(&rec.positions, f, n)?,
    )?;
    write_atomic(&out.join(&files.head), &frame_csv(&rec.head_dirs)?)?;
    write_atomic(&out.join(&files.gaze), &frame_csv(&rec.gaze_dirs)?)?;
    if let (Some(o), Some(name)) = (&rec.joint_orient_dirs, &files.orientations) {
        write_atomic(&out.join(name), &joint_csv(o, f, n)?)?;
    }
    if let (Some(p), Some(name)) = (&rec.partner_positions, &files.partner_positions) {
        write_atomic(&out.join(name), &joint_csv(p, f, n)?)?;
    }
    let manifest = Manifest {
        version: MANIFEST_VERSION,
        id: Some(rec.id.clone()),
        skeleton,
        fps: rec.fps,
        frames: f,
        activity: rec.activity.clone(),
        files,
    };
    let json = serde_json::to_vec_pretty(&manifest).map_err(|e| Error::Contract(e.to_string()))?;
    write_atomic(path, &json)
}
