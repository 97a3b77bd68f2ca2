mod common;

use std::f64::consts::PI;

use common::unit_columns;
use pose2gaze::model::{ModelConfig, Pose2Gaze};
use pose2gaze::motiondata::{make_windows, synth_generate, SampleWindow, Setting, SynthConfig};
use pose2gaze::ndops::Tensor;
use pose2gaze::trainer::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_model() -> ModelConfig {
    ModelConfig {
        seq_len: 6,
        ori_channels: 8,
        latent_dim: 4,
        fusion_channels: 8,
        residual_blocks: 2,
        ..ModelConfig::new(3, false)
    }
}

fn windows(seed: u64, setting: Setting) -> Vec<SampleWindow> {
    let rec = synth_generate(
        &SynthConfig {
            joints: 3,
            frames: 120,
            ..Default::default()
        },
        seed,
    )
    .unwrap();
    make_windows(&rec, setting, 6, 3).unwrap()
}

fn quick(seed: u64, epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 8,
        seed,
        ..TrainConfig::default()
    }
}

#[test]
fn loss_law_identical_orthogonal_antiparallel() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let g = unit_columns(9, &mut rng);
    assert!(angular_loss(&g, &g).unwrap() <= 1e-5);
    let neg = Tensor::from_fn(&[3, 9], |i| -g.data()[i]);
    assert!((angular_loss(&g, &neg).unwrap() - PI).abs() <= 1e-5);
    let x = Tensor::new(vec![3, 2], vec![1., 0., 0., 1., 0., 0.]).unwrap();
    let y = Tensor::new(vec![3, 2], vec![0., 0., 1., 0., 0., 1.]).unwrap();
    assert!((angular_loss(&x, &y).unwrap() - PI / 2.0).abs() <= 1e-12);
}

#[test]
fn loss_rejects_non_unit_columns() {
    let x = Tensor::new(vec![3, 1], vec![0.9, 0., 0.]).unwrap();
    let y = Tensor::new(vec![3, 1], vec![1., 0., 0.]).unwrap();
    assert!(matches!(
        angular_loss(&x, &y),
        Err(pose2gaze::Error::Contract(_))
    ));
}

#[test]
fn learning_rate_decays_per_epoch() {
    let c = TrainConfig::default();
    assert_eq!(c.lr_at(0), 0.005);
    assert!((c.lr_at(10) - 0.005 * 0.95f64.powi(10)).abs() < 1e-18);
}

#[test]
fn same_seed_same_history_and_weights() {
    let ws = windows(1, Setting::Present);
    let run = |seed| {
        let mut m = Pose2Gaze::new(small_model(), seed).unwrap();
        let h = train(&mut m, &ws, &quick(seed, 2), Some(&ws[..4])).unwrap();
        (h, m.params)
    };
    let (h1, p1) = run(3);
    let (h2, p2) = run(3);
    assert_eq!(h1, h2);
    assert_eq!(p1, p2);
    let (h3, _) = run(4);
    assert_ne!(h1, h3);
}

#[test]
fn training_reduces_loss() {
    let ws = windows(2, Setting::Present);
    let mut m = Pose2Gaze::new(small_model(), 0).unwrap();
    let h = train(&mut m, &ws, &quick(0, 8), None).unwrap();
    let first = h.epochs[0].train_loss;
    let last = h.final_loss().unwrap();
    assert!(last < first, "{first} -> {last}");
    assert_eq!(h.epochs.len(), 8);
    assert!(h.epochs.iter().all(|e| e.eval_error.is_none()));
}

#[test]
fn training_without_windows_is_an_error() {
    let mut m = Pose2Gaze::new(small_model(), 0).unwrap();
    assert!(train(&mut m, &[], &quick(0, 1), None).is_err());
}

#[test]
fn past_baseline_holds_last_observed_head() {
    let ws = windows(3, Setting::Past);
    let w = &ws[2];
    let b = head_direction_baseline(w);
    for k in 0..6 {
        for c in 0..3 {
            assert_eq!(b.at2(c, k), w.head_in.at2(c, 5));
        }
    }
    let present = &windows(3, Setting::Present)[0];
    assert_eq!(&head_direction_baseline(present), &present.head_in);
}

#[test]
fn eval_report_averages_per_window_errors() {
    let ws = windows(4, Setting::Present);
    let r = evaluate_with(|w| Ok(head_direction_baseline(w)), &ws, "head").unwrap();
    assert_eq!(r.windows, ws.len());
    let mean: f64 = r.per_window.iter().map(|e| e.error_deg).sum::<f64>() / ws.len() as f64;
    assert!((r.overall_deg - mean).abs() < 1e-12);
    // oracle for one window
    let w = &ws[0];
    let t = w.seq_len();
    let want: f64 = (0..t)
        .map(|k| {
            let d: f64 = (0..3)
                .map(|c| w.head_in.at2(c, k) * w.gaze_target.at2(c, k))
                .sum();
            d.clamp(-1.0, 1.0).acos().to_degrees()
        })
        .sum::<f64>()
        / t as f64;
    assert!((r.per_window[0].error_deg - want).abs() < 1e-9);
}

fn names(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

#[test]
fn ablation_variants_remove_their_tensors() {
    let base = ModelConfig {
        residual_blocks: 2,
        ..small_model()
    };
    let base = ModelConfig {
        partner: true,
        ..base
    };
    let rec = synth_generate(
        &SynthConfig {
            joints: 3,
            frames: 80,
            partner: true,
            ..Default::default()
        },
        5,
    )
    .unwrap();
    let ws = make_windows(&rec, Setting::Present, 6, 6).unwrap();
    let vs = AblationVariant::applicable(&base);
    assert_eq!(vs.len(), 7);
    let rows = run_ablation_suite(&base, &ws, &ws, &quick(0, 1), &vs).unwrap();
    let row = |v: AblationVariant| rows.iter().find(|r| r.variant == v).unwrap();
    for r in &rows {
        assert!(r.report.overall_deg.is_finite());
    }
    assert!(row(AblationVariant::Full).removed.is_empty());
    assert!(row(AblationVariant::NoDct).removed.is_empty());
    assert_eq!(
        names(&row(AblationVariant::NoSgcn).removed),
        ["start.adj_s", "res0.adj_s", "res1.adj_s"]
    );
    assert_eq!(
        names(&row(AblationVariant::NoTgcn).removed),
        ["start.adj_t", "res0.adj_t", "res1.adj_t"]
    );
    let no_pose = row(AblationVariant::NoPose);
    assert!(no_pose
        .removed
        .iter()
        .all(|n| n.starts_with("start.") || n.starts_with("res")));
    assert_eq!(no_pose.removed.len(), 3 + 2 * 5);
    assert_eq!(names(&no_pose.resized), ["fusion.conv1.weight"]);
    let no_head = row(AblationVariant::NoHead);
    assert!(no_head.removed.iter().all(|n| n.starts_with("ori.")));
    assert_eq!(no_head.removed.len(), 10);
    let no_partner = row(AblationVariant::NoPartner);
    assert!(no_partner.removed.is_empty());
    assert!(no_partner.resized.contains(&"start.adj_s".to_string()));
    assert!(no_partner.param_count < row(AblationVariant::Full).param_count);
}

#[test]
fn no_partner_needs_partner_data() {
    assert!(AblationVariant::NoPartner.apply(&small_model()).is_err());
    assert_eq!(
        "no-head".parse::<AblationVariant>().unwrap(),
        AblationVariant::NoHead
    );
}
