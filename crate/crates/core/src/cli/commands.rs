use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::{json, Value};

use super::config::{EvalSplit, RunConfig};
use super::Command;
use crate::coordination::{
    amplitude_lag_correlation, amplitude_series, bodypart_summary, gaze_in_head_series,
    gaze_motion_table, gaze_orientation_table, head_lag_curve, interbody_direction_table, kmeans,
    motion_lag_curve, smoothed_distribution, LagCurve,
};
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::model::Pose2Gaze;
use crate::motiondata::{
    load_recording, make_windows, save_recording, synth_generate, Recording, SampleWindow,
    SkeletonSpec, Vec3,
};
use crate::trainer::{
    evaluate, evaluate_with, head_direction_baseline, run_ablation_suite, train, AblationRow,
    AblationVariant, EvalReport,
};

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

fn write_text(out: &Path, rel: &str, text: &str) -> Result<()> {
    write_atomic(&out.join(rel), text.as_bytes())
}

fn write_json(out: &Path, rel: &str, value: &Value) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Contract(e.to_string()))?;
    s.push('\n');
    write_text(out, rel, &s)
}

pub(super) fn execute(cmd: Command, cfg: &RunConfig) -> Result<()> {
    let started = unix_now();
    let out = cfg.out.as_path();
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_text(out, "config.resolved", &cfg.to_toml()?)?;
    match cmd {
        Command::Synth => cmd_synth(cfg)?,
        Command::Analyze => cmd_analyze(cfg)?,
        Command::Train => cmd_train(cfg)?,
        Command::Eval => cmd_eval(cfg)?,
        Command::Predict => cmd_predict(cfg)?,
        Command::Ablate => cmd_ablate(cfg)?,
    }
    write_json(
        out,
        "metadata.json",
        &json!({
            "command": cmd.name(),
            "version": env!("CARGO_PKG_VERSION"),
            "started_unix_s": started,
            "finished_unix_s": unix_now(),
        }),
    )
}

fn skeleton_override(cfg: &RunConfig) -> Result<Option<SkeletonSpec>> {
    cfg.skeleton
        .as_deref()
        .map(SkeletonSpec::by_name)
        .transpose()
}

fn cmd_synth(cfg: &RunConfig) -> Result<()> {
    let mut scfg = cfg.synth.to_synth_config();
    scfg.skeleton = skeleton_override(cfg)?;
    let mut listed = Vec::new();
    for i in 0..cfg.synth.count {
        let seed = cfg.seed.wrapping_add(i as u64);
        let rec = synth_generate(&scfg, seed)?;
        let rel = format!("recordings/rec_{i:03}/manifest.json");
        save_recording(&rec, &cfg.out.join(&rel))?;
        listed.push(json!({
            "id": rec.id,
            "manifest": rel,
            "frames": rec.frames(),
            "joints": rec.joints(),
            "partner": rec.has_partner(),
            "dominant_joint": rec.skeleton.joints[scfg.dominant_index(&rec.skeleton)],
        }));
    }
    write_json(
        &cfg.out,
        "report.json",
        &json!({ "command": "synth", "recordings": listed }),
    )
}

fn find_manifests(path: &Path, found: &mut Vec<PathBuf>) -> Result<()> {
    if path.is_file() {
        found.push(path.to_path_buf());
        return Ok(());
    }
    let mut entries: Vec<PathBuf> = std::fs::read_dir(path)
        .map_err(|e| Error::io(path, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(path, err)))
        .collect::<Result<_>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            find_manifests(&p, found)?;
        } else if p.file_name().is_some_and(|n| n == "manifest.json") {
            found.push(p);
        }
    }
    Ok(())
}

fn load_recordings(cfg: &RunConfig) -> Result<Vec<Recording>> {
    if cfg.data.recordings.is_empty() {
        return Err(Error::Config(
            "no recordings given (set data.recordings or pass --data)".into(),
        ));
    }
    let mut manifests = Vec::new();
    for p in &cfg.data.recordings {
        find_manifests(p, &mut manifests)?;
    }
    if manifests.is_empty() {
        return Err(Error::Config(
            "no manifest.json found under the data paths".into(),
        ));
    }
    let skeleton = skeleton_override(cfg)?;
    let mut recs = Vec::new();
    for m in &manifests {
        let mut rec = load_recording(m)?;
        if let Some(sk) = &skeleton {
            if sk.len() != rec.joints() {
                return Err(Error::Config(format!(
                    "skeleton {} has {} joints but recording {} has {}",
                    sk.name,
                    sk.len(),
                    rec.id,
                    rec.joints()
                )));
            }
            rec.skeleton = sk.clone();
        }
        recs.push(rec);
    }
    Ok(recs)
}

fn average_curves(curves: &[LagCurve], fps: f64) -> Result<LagCurve> {
    let first = &curves[0];
    if curves.iter().any(|c| c.lags_frames != first.lags_frames) {
        return Err(Error::Analysis(
            "recordings disagree on frame lags (mixed frame rates?)".into(),
        ));
    }
    let n = curves.len() as f64;
    let values = (0..first.values.len())
        .map(|i| curves.iter().map(|c| c.values[i]).sum::<f64>() / n)
        .collect();
    Ok(LagCurve::from_values(
        first.lags_frames.clone(),
        values,
        fps,
    ))
}

/// Mean over joints of each joint's orientation amplitude, or the head
/// amplitude when orientations are absent.
fn body_amplitude(rec: &Recording) -> Vec<f64> {
    let f = rec.frames();
    match &rec.joint_orient_dirs {
        Some(o) => {
            let mut acc = vec![0.0; f - 1];
            for j in 0..rec.joints() {
                for (a, v) in acc.iter_mut().zip(amplitude_series(&o[j * f..(j + 1) * f])) {
                    *a += v;
                }
            }
            acc.iter().map(|a| a / rec.joints() as f64).collect()
        }
        None => amplitude_series(&rec.head_dirs),
    }
}

fn cmd_analyze(cfg: &RunConfig) -> Result<()> {
    let recs = load_recordings(cfg)?;
    let out = cfg.out.as_path();
    let a = &cfg.analysis;
    let mut report = serde_json::Map::new();
    let mut skipped: Vec<Value> = Vec::new();
    let mut skip = |what: &str, e: Error| {
        log::warn!("analyze: skipping {what}: {e}");
        skipped.push(json!({ "analysis": what, "reason": e.to_string() }));
    };
    report.insert(
        "recordings".into(),
        json!(recs.iter().map(|r| r.id.clone()).collect::<Vec<_>>()),
    );
    let skeleton = &recs[0].skeleton;

    let mut tables = serde_json::Map::new();
    let mut parts = serde_json::Map::new();
    let motion = gaze_motion_table(&recs)?;
    write_text(out, "tables/gaze_body_motion.csv", &motion.to_csv())?;
    let summary = bodypart_summary(&motion, skeleton)?;
    write_text(out, "tables/bodypart_motion.csv", &summary.to_csv())?;
    tables.insert("gaze_body_motion".into(), motion.to_json());
    parts.insert("gaze_body_motion".into(), json!(summary));
    if recs.iter().all(|r| r.joint_orient_dirs.is_some()) {
        let t = gaze_orientation_table(&recs, None)?;
        let s = bodypart_summary(&t, skeleton)?;
        write_text(out, "tables/gaze_body_orientation.csv", &t.to_csv())?;
        write_text(out, "tables/bodypart_orientation.csv", &s.to_csv())?;
        tables.insert("gaze_body_orientation".into(), t.to_json());
        parts.insert("gaze_body_orientation".into(), json!(s));
    } else {
        skip(
            "gaze_body_orientation",
            Error::Analysis("orientation channel missing".into()),
        );
    }
    if recs.iter().all(Recording::has_partner) {
        let t = interbody_direction_table(&recs)?;
        write_text(out, "tables/gaze_two_body_motion.csv", &t.to_csv())?;
        tables.insert("gaze_two_body_motion".into(), t.to_json());
    } else {
        skip(
            "gaze_two_body_motion",
            Error::Analysis("partner missing".into()),
        );
    }
    report.insert("tables".into(), Value::Object(tables));
    report.insert("bodypart".into(), Value::Object(parts));

    let fps = recs[0].fps;
    let mut curves = serde_json::Map::new();
    type CurveFn<'a> = Box<dyn Fn(&Recording) -> Result<LagCurve> + 'a>;
    let curve_fns: Vec<(&str, CurveFn)> = vec![
        ("head_lag", Box::new(|r| head_lag_curve(r, a.lag_range_ms))),
        (
            "motion_lag",
            Box::new(|r| motion_lag_curve(r, None, a.lag_range_ms)),
        ),
        (
            "amplitude_lag",
            Box::new(|r| {
                amplitude_lag_correlation(
                    &amplitude_series(&r.gaze_dirs),
                    &body_amplitude(r),
                    a.lag_range_ms,
                    r.fps,
                )
            }),
        ),
    ];
    for (name, f) in curve_fns {
        let result = recs
            .iter()
            .map(&f)
            .collect::<Result<Vec<_>>>()
            .and_then(|cs| average_curves(&cs, fps));
        match result {
            Ok(c) => {
                write_text(out, &format!("curves/{name}.csv"), &c.to_csv())?;
                curves.insert(name.into(), json!(c));
            }
            Err(e) => skip(name, e),
        }
    }
    report.insert("curves".into(), Value::Object(curves));

    let mut angles = Vec::new();
    let mut undefined = 0;
    for r in &recs {
        let (a_r, s) = gaze_in_head_series(r, a.world_up);
        angles.extend(a_r);
        undefined += s;
    }
    match smoothed_distribution(&angles, &a.grid, a.sigma_deg) {
        Ok(g) => {
            write_text(out, "curves/gaze_field.csv", &g.to_csv())?;
            report.insert(
                "gaze_field".into(),
                json!({
                    "h_range": g.h_range, "v_range": g.v_range, "cell_deg": g.cell_deg,
                    "total": g.total, "clamped": g.clamped, "undefined_frames": undefined,
                }),
            );
        }
        Err(e) => skip("gaze_field", e),
    }
    let k = a.kmeans_k.min(angles.len());
    match kmeans(&angles, k, cfg.seed, a.kmeans_max_iter) {
        Ok(km) => {
            write_text(out, "tables/gaze_clusters.csv", &km.to_csv())?;
            report.insert(
                "clusters".into(),
                json!({
                    "k": k, "converged": km.converged, "iterations": km.objective.len(),
                    "objective": km.objective.last(), "centers": km.centers,
                }),
            );
        }
        Err(e) => skip("gaze_clusters", e),
    }
    report.insert("skipped".into(), Value::Array(skipped));
    write_json(out, "report.json", &Value::Object(report))
}

/// Recordings restricted to the requested part, with each part's first
/// frame in the source recording.
fn split(cfg: &RunConfig, recs: &[Recording], part: EvalSplit, train: bool) -> Result<Vec<Part>> {
    let frac = cfg.data.train_fraction;
    if part == EvalSplit::All {
        return Ok(recs.iter().map(|r| (r.clone(), 0)).collect());
    }
    if !(frac > 0.0 && frac < 1.0) {
        return Err(Error::Config(format!(
            "data.train_fraction must lie in (0, 1), got {frac}"
        )));
    }
    recs.iter()
        .map(|r| {
            let f = r.frames();
            let cut = (f as f64 * frac).floor() as usize;
            if cut < 2 || f - cut < 2 {
                return Err(Error::Config(format!(
                    "recording {} ({f} frames) is too short to split at {frac}",
                    r.id
                )));
            }
            let range = if train { 0..cut } else { cut..f };
            let start = range.start;
            Ok((r.slice_frames(range, r.id.clone())?, start))
        })
        .collect()
}

fn windows(
    parts: &[Part],
    cfg: &RunConfig,
    seq_len: usize,
    stride: usize,
) -> Result<Vec<SampleWindow>> {
    let mut out = Vec::new();
    for (r, _) in parts {
        out.extend(make_windows(r, cfg.setting, seq_len, stride)?);
    }
    Ok(out)
}

fn data_shape(recs: &[Recording]) -> Result<(usize, bool)> {
    let n = recs[0].joints();
    if recs.iter().any(|r| r.joints() != n) {
        return Err(Error::Config(
            "recordings have different joint counts".into(),
        ));
    }
    let partner = recs[0].has_partner();
    if recs.iter().any(|r| r.has_partner() != partner) {
        return Err(Error::Config(
            "some recordings have an interaction partner and others do not".into(),
        ));
    }
    Ok((n, partner))
}

fn nonempty(ws: Vec<SampleWindow>, what: &str) -> Result<Vec<SampleWindow>> {
    if ws.is_empty() {
        return Err(Error::Config(format!(
            "no {what} windows: recordings too short for the setting"
        )));
    }
    Ok(ws)
}

fn baseline_report(ws: &[SampleWindow]) -> Result<EvalReport> {
    evaluate_with(|w| Ok(head_direction_baseline(w)), ws, "head-direction")
}

fn write_eval_tables(out: &Path, model: &EvalReport, baseline: &EvalReport) -> Result<()> {
    write_text(
        out,
        "tables/eval.csv",
        &format!("{}{}", model.summary_csv(), baseline.summary_csv_rows()),
    )?;
    let mut paired = String::from("recording,activity,anchor,model_deg,baseline_deg\n");
    for (m, b) in model.per_window.iter().zip(&baseline.per_window) {
        paired.push_str(&format!(
            "{},{},{},{},{}\n",
            m.recording, m.activity, m.anchor, m.error_deg, b.error_deg
        ));
    }
    write_text(out, "tables/eval_windows.csv", &paired)
}

fn summary_json(r: &EvalReport) -> Value {
    json!({
        "method": r.method, "setting": r.setting, "overall_deg": r.overall_deg,
        "windows": r.windows, "per_activity": r.per_activity,
    })
}

fn cmd_train(cfg: &RunConfig) -> Result<()> {
    let recs = load_recordings(cfg)?;
    let (n, partner) = data_shape(&recs)?;
    let mcfg = cfg.model.to_model_config(n, partner);
    mcfg.validate()?;
    let t = mcfg.seq_len;
    let train_ws = nonempty(
        windows(
            &split(cfg, &recs, EvalSplit::Test, true)?,
            cfg,
            t,
            cfg.data.stride,
        )?,
        "training",
    )?;
    let test_ws = windows(
        &split(cfg, &recs, EvalSplit::Test, false)?,
        cfg,
        t,
        cfg.data.eval_stride,
    )?;
    let mut model = Pose2Gaze::new(mcfg, cfg.seed)?;
    log::info!(
        "training {} parameters on {} windows",
        model.param_count(),
        train_ws.len()
    );
    let history = train(&mut model, &train_ws, &cfg.train_config(), Some(&test_ws))?;
    let out = cfg.out.as_path();
    model.save_checkpoint(&out.join("checkpoint.json"))?;
    write_text(out, "history.csv", &history.to_csv())?;
    let mut report = json!({
        "command": "train",
        "setting": cfg.setting,
        "param_count": model.param_count(),
        "train_windows": train_ws.len(),
        "test_windows": test_ws.len(),
        "final_train_loss": history.final_loss(),
    });
    if !test_ws.is_empty() {
        let m = evaluate(&model, &test_ws, "pose2gaze")?;
        let b = baseline_report(&test_ws)?;
        write_eval_tables(out, &m, &b)?;
        report["eval"] = summary_json(&m);
        report["baseline"] = summary_json(&b);
    }
    write_json(out, "report.json", &report)
}

/// A recording part and the frame it starts at in its source.
type Part = (Recording, usize);

fn load_model_and_windows(cfg: &RunConfig) -> Result<(Pose2Gaze, Vec<Part>, Vec<SampleWindow>)> {
    let model = Pose2Gaze::load_checkpoint(&cfg.checkpoint_path())?;
    let recs = load_recordings(cfg)?;
    let parts = split(cfg, &recs, cfg.data.eval_split, false)?;
    let ws = nonempty(
        windows(&parts, cfg, model.config.seq_len, cfg.data.eval_stride)?,
        "evaluation",
    )?;
    Ok((model, parts, ws))
}

fn cmd_eval(cfg: &RunConfig) -> Result<()> {
    let (model, _, ws) = load_model_and_windows(cfg)?;
    let m = evaluate(&model, &ws, "pose2gaze")?;
    let b = baseline_report(&ws)?;
    write_eval_tables(&cfg.out, &m, &b)?;
    write_json(
        &cfg.out,
        "report.json",
        &json!({
            "command": "eval",
            "checkpoint": cfg.checkpoint_path(),
            "param_count": model.param_count(),
            "eval": summary_json(&m),
            "baseline": summary_json(&b),
        }),
    )
}

fn cmd_predict(cfg: &RunConfig) -> Result<()> {
    let (model, parts, ws) = load_model_and_windows(cfg)?;
    let offsets: BTreeMap<&str, usize> = parts.iter().map(|(r, o)| (r.id.as_str(), *o)).collect();
    let mut csv = String::from("recording,anchor,step,frame,x,y,z\n");
    for w in &ws {
        let g = model.predict(w)?;
        let t = g.shape()[1];
        let base = offsets[w.source.recording.as_str()] + w.source.anchor + 1;
        for k in 0..t {
            let v: Vec3 = [g.at2(0, k), g.at2(1, k), g.at2(2, k)];
            csv.push_str(&format!(
                "{},{},{k},{},{},{},{}\n",
                w.source.recording,
                w.source.anchor,
                base + k,
                v[0],
                v[1],
                v[2]
            ));
        }
    }
    write_text(&cfg.out, "predictions.csv", &csv)?;
    write_json(
        &cfg.out,
        "report.json",
        &json!({ "command": "predict", "windows": ws.len(), "setting": cfg.setting }),
    )
}

fn cmd_ablate(cfg: &RunConfig) -> Result<()> {
    let recs = load_recordings(cfg)?;
    let (n, partner) = data_shape(&recs)?;
    let base = cfg.model.to_model_config(n, partner);
    base.validate()?;
    let variants = if cfg.ablate.variants.is_empty() {
        AblationVariant::applicable(&base)
    } else {
        cfg.ablate
            .variants
            .iter()
            .map(|s| s.parse())
            .collect::<Result<Vec<_>>>()?
    };
    let t = base.seq_len;
    let train_ws = nonempty(
        windows(
            &split(cfg, &recs, EvalSplit::Test, true)?,
            cfg,
            t,
            cfg.data.stride,
        )?,
        "training",
    )?;
    let test_ws = nonempty(
        windows(
            &split(cfg, &recs, EvalSplit::Test, false)?,
            cfg,
            t,
            cfg.data.eval_stride,
        )?,
        "test",
    )?;
    let rows = run_ablation_suite(&base, &train_ws, &test_ws, &cfg.train_config(), &variants)?;
    write_text(&cfg.out, "tables/ablation.csv", &AblationRow::csv(&rows))?;
    let json_rows: Vec<Value> = rows
        .iter()
        .map(|r| {
            json!({
                "variant": r.variant, "param_count": r.param_count, "removed": r.removed,
                "resized": r.resized, "final_train_loss": r.history.final_loss(),
                "eval": summary_json(&r.report),
            })
        })
        .collect();
    write_json(
        &cfg.out,
        "report.json",
        &json!({ "command": "ablate", "setting": cfg.setting, "rows": json_rows }),
    )
}
