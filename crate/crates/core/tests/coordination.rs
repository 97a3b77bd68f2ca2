mod common;

use common::*;
use pose2gaze::coordination::*;
use pose2gaze::motiondata::{synth_generate, Recording, SynthConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fixtures() -> Vec<Recording> {
    vec![
        random_recording(1, 4, 40, "walk"),
        random_recording(2, 4, 25, "reach"),
        random_recording(3, 4, 31, "walk"),
    ]
}

#[test]
fn orientation_table_matches_oracle() {
    let recs = fixtures();
    let t = gaze_orientation_table(&recs, None).unwrap();
    let o = oracle_table(&recs, oracle_orientation_pair, Recording::frames);
    assert!(table_deviation(&t, &o) <= 1e-12);
}

#[test]
fn motion_table_matches_oracle_with_masking() {
    let recs = fixtures();
    let t = gaze_motion_table(&recs).unwrap();
    let o = oracle_table(&recs, oracle_motion_pair, |r| r.frames() - 1);
    assert!(table_deviation(&t, &o) <= 1e-12);
    // still steps were dropped
    let full: u64 = (0..4).map(|j| t.count("walk", j)).sum();
    assert!(full < 4 * (39 + 30));
}

#[test]
fn interbody_table_matches_oracle() {
    let recs = fixtures();
    let t = interbody_direction_table(&recs).unwrap();
    let o = oracle_table(&recs, oracle_interbody_pair, Recording::frames);
    assert!(table_deviation(&t, &o) <= 1e-12);
}

#[test]
fn interbody_without_partner_is_analysis_error() {
    let mut r = random_recording(4, 3, 10, "x");
    r.partner_positions = None;
    assert!(matches!(
        interbody_direction_table(&[r]),
        Err(pose2gaze::Error::Analysis(_))
    ));
}

#[test]
fn spearman_matches_rank_counting_oracle_with_ties() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for n in [2usize, 3, 7, 20, 64] {
        for _ in 0..5 {
            // small integer alphabet forces ties
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(0..5) as f64).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.random_range(0..4) as f64).collect();
            match spearman(&x, &y) {
                Ok(r) => assert!((r - oracle_spearman(&x, &y)).abs() <= 1e-12),
                Err(pose2gaze::Error::Degenerate(_)) => {
                    assert!(x.iter().all(|v| *v == x[0]) || y.iter().all(|v| *v == y[0]))
                }
                Err(e) => panic!("{e}"),
            }
        }
    }
}

#[test]
fn amplitude_series_matches_atan2_oracle() {
    let r = random_recording(5, 2, 50, "x");
    let a = amplitude_series(&r.gaze_dirs);
    assert_eq!(a.len(), 49);
    for (t, v) in a.iter().enumerate() {
        assert!((v - oracle_angle_deg(r.gaze_dirs[t], r.gaze_dirs[t + 1])).abs() <= 1e-12);
    }
}

#[test]
fn bodypart_summary_is_mean_of_joint_cells() {
    let recs = fixtures();
    let t = gaze_orientation_table(&recs, None).unwrap();
    let s = bodypart_summary(&t, &recs[0].skeleton).unwrap();
    for (part, joints) in &recs[0].skeleton.parts {
        if joints.is_empty() {
            continue;
        }
        let m: f64 = joints
            .iter()
            .map(|j| t.value("walk", t.col_index(j).unwrap()).unwrap())
            .sum::<f64>()
            / joints.len() as f64;
        assert!((s.rows["walk"][part] - m).abs() <= 1e-12);
    }
    let other = pose2gaze::motiondata::SkeletonSpec::mogaze21();
    assert!(matches!(
        bodypart_summary(&t, &other),
        Err(pose2gaze::Error::Contract(_))
    ));
}

#[test]
fn motion_lag_recovers_injected_lag() {
    for lag in [-6i64, 0, 9] {
        let cfg = SynthConfig {
            lag_frames: lag,
            frames: 1800,
            ..SynthConfig::default()
        };
        let rec = synth_generate(&cfg, 21).unwrap();
        let dom = cfg.dominant_index(&rec.skeleton);
        let c = motion_lag_curve(&rec, Some(&[dom]), (-1000.0, 1000.0)).unwrap();
        assert_eq!(c.peak_lag_frames, lag);
    }
}

#[test]
fn lag_zero_equals_plain_mean_cosine() {
    let r = random_recording(6, 1, 30, "x");
    let c = head_lag_curve(&r, (-100.0, 100.0)).unwrap();
    let zero = c.lags_frames.iter().position(|k| *k == 0).unwrap();
    let plain: f64 = (0..30)
        .map(|t| cosine_similarity(r.gaze_dirs[t], r.head_dirs[t]).unwrap())
        .sum::<f64>()
        / 30.0;
    assert_eq!(c.values[zero], plain);
}

#[test]
fn amplitude_lag_recovers_shift() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g: Vec<f64> = (0..400).map(|_| rng.random::<f64>()).collect();
    // body(t + 5) = gaze(t)
    let mut b = vec![0.5; 5];
    b.extend_from_slice(&g[..395]);
    let c = amplitude_lag_correlation(&g, &b, (-500.0, 500.0), 30.0).unwrap();
    assert_eq!(c.peak_lag_frames, 5);
    assert!((c.peak_value() - 1.0).abs() < 1e-12);
}

fn blobs() -> (Vec<[f64; 2]>, Vec<[f64; 2]>) {
    let centers = vec![[-20.0, 0.0], [0.0, 15.0], [25.0, -10.0]];
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut pts = Vec::new();
    for c in &centers {
        for _ in 0..100 {
            let d = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            // mirrored pairs make each blob's mean exactly its center
            pts.push([c[0] + d[0], c[1] + d[1]]);
            pts.push([c[0] - d[0], c[1] - d[1]]);
        }
    }
    (pts, centers)
}

#[test]
fn kmeans_recovers_separated_centers() {
    let (pts, centers) = blobs();
    let km = kmeans(&pts, 3, 4, 100).unwrap();
    assert!(km.converged);
    for c in &centers {
        let best = km
            .centers
            .iter()
            .map(|k| ((k[0] - c[0]).powi(2) + (k[1] - c[1]).powi(2)).sqrt())
            .fold(f64::INFINITY, f64::min);
        assert!(best <= 0.05, "center {c:?} missed by {best}");
    }
    for w in km.objective.windows(2) {
        assert!(w[1] <= w[0] + 1e-9);
    }
    assert_eq!(km, kmeans(&pts, 3, 4, 100).unwrap());
}

#[test]
fn kmeans_rejects_more_clusters_than_points() {
    assert!(kmeans(&[[0.0, 0.0]], 2, 0, 10).is_err());
}

#[test]
fn smoothing_conserves_mass_including_edge_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let pts: Vec<[f64; 2]> = (0..500)
        .map(|_| [rng.random_range(-70.0..70.0), rng.random_range(-50.0..50.0)])
        .collect();
    let g = smoothed_distribution(&pts, &GridConfig::default(), 1.0).unwrap();
    let mass: f64 = g.density.iter().sum();
    assert!((mass - 500.0).abs() <= 1e-9);
    assert!(g.clamped > 0);
}

#[test]
fn gaze_in_head_angles_of_known_offsets() {
    let up = DEFAULT_WORLD_UP;
    let fwd = [1.0, 0.0, 0.0];
    let (h, v) = gaze_in_head_angles(fwd, fwd, up).unwrap();
    assert!(h.abs() < 1e-12 && v.abs() < 1e-12);
    let s = 30f64.to_radians();
    let (h, v) = gaze_in_head_angles([s.cos(), 0.0, s.sin()], fwd, up).unwrap();
    assert!(h.abs() < 1e-9 && (v - 30.0).abs() < 1e-9);
    let (h, _) = gaze_in_head_angles([s.cos(), s.sin(), 0.0], fwd, up).unwrap();
    assert!((h.abs() - 30.0).abs() < 1e-9);
    assert!(gaze_in_head_angles(fwd, up, up).is_err());
}
