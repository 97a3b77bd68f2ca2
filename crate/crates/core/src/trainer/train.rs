use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::eval::evaluate;
use super::loss::angular_loss_tape;
use crate::error::{Error, Result};
use crate::model::{forward, window_inputs, BoundParams, Pose2Gaze};
use crate::motiondata::{SampleWindow, Setting};
use crate::ndops::{adam_step, AdamState, Tape, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr0: f64,
    /// Multiplier applied to the learning rate after every epoch.
    pub decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub setting: Setting,
    /// Evaluate on the held-out windows every this many epochs (0 = never).
    pub eval_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr0: 0.005,
            decay: 0.95,
            batch_size: 32,
            epochs: 50,
            seed: 0,
            setting: Setting::Present,
            eval_every: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return Err(Error::Parameter(format!(
                "lr0 must be positive, got {}",
                self.lr0
            )));
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err(Error::Parameter(format!(
                "decay must lie in (0, 1], got {}",
                self.decay
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Parameter("batch_size must be at least 1".into()));
        }
        Ok(())
    }

    /// Learning rate used during epoch `k` (0-based).
    pub fn lr_at(&self, k: usize) -> f64 {
        self.lr0 * self.decay.powi(k as i32)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    /// Mean per-window training loss in radians.
    pub train_loss: f64,
    /// Held-out mean angular error in degrees, when evaluated.
    pub eval_error: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,lr,train_loss,eval_error\n");
        for r in &self.epochs {
            let e = r.eval_error.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{},{e}\n", r.epoch, r.lr, r.train_loss));
        }
        out
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.epochs.last().map(|r| r.train_loss)
    }
}

/// SplitMix64 finalizer, used to derive independent RNG seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn dropout_seed(seed: u64, epoch: usize, ordinal: usize) -> u64 {
    mix(mix(mix(seed ^ 0xD50F) ^ epoch as u64) ^ ordinal as u64)
}

/// Loss of one window and its gradient for every parameter tensor.
pub fn window_loss_and_grads(
    model: &Pose2Gaze,
    window: &SampleWindow,
    training: bool,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, Vec<Tensor>)> {
    let (head, pose) = window_inputs(&model.config, window)?;
    let mut tape = Tape::new();
    let p = BoundParams::bind(&mut tape, &model.params, true);
    let h = tape.constant(head);
    let x = tape.constant(pose);
    let target = tape.constant(window.gaze_target.clone());
    let pred = forward(&mut tape, &model.config, &p, h, x, training, rng)?;
    let loss = angular_loss_tape(&mut tape, pred, target)?;
    tape.backward(loss)?;
    let grads = p
        .vars()
        .iter()
        .zip(&model.params.tensors)
        .map(|(&v, t)| tape.grad(v).unwrap_or_else(|| Tensor::zeros(t.shape())))
        .collect();
    Ok((tape.value(loss).item()?, grads))
}

/// Mini-batch Adam on the mean angular loss, with the window order
/// reshuffled every epoch and the learning rate decayed after each one.
///
/// Per-window gradients may be computed in parallel; each window's dropout
/// stream depends only on (seed, epoch, position) and gradients are summed
/// in window order, so results do not depend on the thread count.
pub fn train(
    model: &mut Pose2Gaze,
    windows: &[SampleWindow],
    tcfg: &TrainConfig,
    eval_windows: Option<&[SampleWindow]>,
) -> Result<TrainHistory> {
    tcfg.validate()?;
    model.config.validate()?;
    if windows.is_empty() {
        return Err(Error::Parameter("no training windows".into()));
    }
    let mut adam = AdamState::new(&model.params.tensors);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(mix(tcfg.seed));
    let mut order: Vec<usize> = (0..windows.len()).collect();
    let mut history = TrainHistory::default();
    for epoch in 0..tcfg.epochs {
        let lr = tcfg.lr_at(epoch);
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for (b, batch) in order.chunks(tcfg.batch_size).enumerate() {
            let frozen = &*model;
            let results = batch
                .par_iter()
                .enumerate()
                .map(|(i, &w)| {
                    let ordinal = b * tcfg.batch_size + i;
                    let mut rng =
                        ChaCha8Rng::seed_from_u64(dropout_seed(tcfg.seed, epoch, ordinal));
                    window_loss_and_grads(frozen, &windows[w], true, &mut rng)
                })
                .collect::<Result<Vec<_>>>()?;
            let scale = 1.0 / batch.len() as f64;
            let mut grads: Vec<Tensor> = model
                .params
                .tensors
                .iter()
                .map(|t| Tensor::zeros(t.shape()))
                .collect();
            for (loss, g) in &results {
                loss_sum += loss;
                for (acc, gi) in grads.iter_mut().zip(g) {
                    for (a, v) in acc.data_mut().iter_mut().zip(gi.data()) {
                        *a += v * scale;
                    }
                }
            }
            adam_step(&mut model.params.tensors, &grads, &mut adam, lr)?;
        }
        let eval_error = match eval_windows {
            Some(ev)
                if tcfg.eval_every > 0 && (epoch + 1) % tcfg.eval_every == 0 && !ev.is_empty() =>
            {
                Some(evaluate(model, ev, "pose2gaze")?.overall_deg)
            }
            _ => None,
        };
        let record = EpochRecord {
            epoch,
            lr,
            train_loss: loss_sum / windows.len() as f64,
            eval_error,
        };
        log::info!(
            "epoch {} lr {:.6} loss {:.5}{}",
            epoch,
            lr,
            record.train_loss,
            eval_error
                .map(|e| format!(" eval {e:.3}°"))
                .unwrap_or_default()
        );
        history.epochs.push(record);
    }
    Ok(history)
}
