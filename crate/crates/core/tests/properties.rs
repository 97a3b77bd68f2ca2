mod common;

use common::oracle_cos;
use pose2gaze::coordination::*;
use pose2gaze::motiondata::{make_windows, synth_generate, Setting, SynthConfig, Vec3};
use pose2gaze::ndops::{dct_matrix, Tape, Tensor};
use proptest::prelude::*;

fn unit() -> impl Strategy<Value = Vec3> {
    (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
        .prop_filter("non-degenerate", |(x, y, z)| x * x + y * y + z * z > 0.01)
        .prop_map(|(x, y, z)| {
            let n = (x * x + y * y + z * z).sqrt();
            [x / n, y / n, z / n]
        })
}

fn rotate(v: Vec3, axis: Vec3, angle: f64) -> Vec3 {
    // Rodrigues
    let (s, c) = angle.sin_cos();
    let d = axis[0] * v[0] + axis[1] * v[1] + axis[2] * v[2];
    let x = [
        axis[1] * v[2] - axis[2] * v[1],
        axis[2] * v[0] - axis[0] * v[2],
        axis[0] * v[1] - axis[1] * v[0],
    ];
    [0, 1, 2].map(|i| v[i] * c + x[i] * s + axis[i] * d * (1.0 - c))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cosine_stays_in_range(a in unit(), b in unit(), s in 0.1f64..10.0) {
        let c = cosine_similarity([a[0] * s, a[1] * s, a[2] * s], b).unwrap();
        prop_assert!((-1.0..=1.0).contains(&c));
        prop_assert!((c - oracle_cos(a, b)).abs() < 1e-12);
    }

    #[test]
    fn spearman_ignores_monotone_transforms(
        pairs in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..40)
    ) {
        let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        prop_assume!(x.iter().any(|v| *v != x[0]) && y.iter().any(|v| *v != y[0]));
        let r = spearman(&x, &y).unwrap();
        let fx: Vec<f64> = x.iter().map(|v| (v / 50.0).exp()).collect();
        let fy: Vec<f64> = y.iter().map(|v| v * v * v - 7.0).collect();
        prop_assert!((spearman(&fx, &fy).unwrap() - r).abs() < 1e-12);
        prop_assert!(r.abs() <= 1.0);
    }

    #[test]
    fn amplitude_is_rotation_invariant(
        dirs in prop::collection::vec(unit(), 2..30),
        axis in unit(),
        angle in -3.0f64..3.0,
    ) {
        let a = amplitude_series(&dirs);
        let rotated: Vec<Vec3> = dirs.iter().map(|d| rotate(*d, axis, angle)).collect();
        let b = amplitude_series(&rotated);
        for (x, y) in a.iter().zip(&b) {
            // acos loses precision near 0° and 180°
            prop_assert!((x - y).abs() < 1e-5);
        }
    }

    #[test]
    fn self_lag_sweep_peaks_at_zero(dirs in prop::collection::vec(unit(), 12..40)) {
        let s = DirectionSequence::from_units(&dirs);
        let c = lag_sweep(&s, std::slice::from_ref(&s), (-300.0, 300.0), 30.0).unwrap();
        let zero = c.lags_frames.iter().position(|k| *k == 0).unwrap();
        prop_assert!((c.values[zero] - 1.0).abs() < 1e-12);
        prop_assert!(c.values.iter().all(|v| *v <= c.values[zero] + 1e-12));
        prop_assert_eq!(c.peak_lag_frames, 0);
    }

    #[test]
    fn smoothing_conserves_mass(
        pts in prop::collection::vec((-80.0f64..80.0, -60.0f64..60.0), 1..60),
        sigma in 0.0f64..3.0,
    ) {
        let pts: Vec<[f64; 2]> = pts.into_iter().map(|(h, v)| [h, v]).collect();
        let grid = GridConfig { h_range: (-20.0, 20.0), v_range: (-10.0, 10.0), cell_deg: 1.0 };
        let g = smoothed_distribution(&pts, &grid, sigma).unwrap();
        prop_assert!((g.density.iter().sum::<f64>() - pts.len() as f64).abs() <= 1e-9);
    }

    #[test]
    fn kmeans_objective_never_increases(
        pts in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 8..60),
        k in 1usize..6,
        seed in 0u64..1000,
    ) {
        let pts: Vec<[f64; 2]> = pts.into_iter().map(|(h, v)| [h, v]).collect();
        let r = kmeans(&pts, k, seed, 50).unwrap();
        for w in r.objective.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12);
        }
        prop_assert_eq!(r, kmeans(&pts, k, seed, 50).unwrap());
    }

    #[test]
    fn dct_round_trip(t in 1usize..40, seed in 0u64..1000) {
        let m = dct_matrix(t).unwrap();
        let p = Tensor::from_fn(&[1, t], |i| ((i as u64 * 7919 + seed) % 97) as f64 / 9.0 - 5.0);
        let mut tape = Tape::new();
        let pv = tape.constant(p.clone());
        let mv = tape.constant(m.clone());
        let mt = tape.transpose(mv).unwrap();
        let c = tape.matmul(pv, mt).unwrap();
        let back = tape.matmul(c, mv).unwrap();
        prop_assert!(tape.value(back).max_abs_diff(&p) <= 1e-9);
    }

    #[test]
    fn window_counts_match_formula(frames in 12usize..80, t in 1usize..16, stride in 1usize..6) {
        let rec = synth_generate(&SynthConfig { joints: 2, frames, ..Default::default() }, 0).unwrap();
        for s in Setting::ALL {
            let ws = make_windows(&rec, s, t, stride).unwrap();
            let (first, span) = match s {
                Setting::Past => (t - 1, t),
                Setting::Present => (0, t),
                Setting::Future => (0, 2 * t),
            };
            // anchors a = first + i·stride with a + span ≤ frames − 1
            let want = (0..).map(|i| first + i * stride).take_while(|a| a + span < frames).count();
            prop_assert_eq!(ws.len(), want);
        }
    }
}
