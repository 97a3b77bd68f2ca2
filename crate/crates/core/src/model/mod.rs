//! The gaze generation network: an orientation CNN on head directions, a
//! DCT + graph-convolution branch on body poses, and a fusion CNN that
//! emits unit gaze directions.

mod checkpoint;
mod config;
mod forward;
mod params;

use std::path::Path;

use rand::{Rng, SeedableRng};

pub use checkpoint::{CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use config::ModelConfig;
pub use forward::{
    dct_encode, decode_motion_features, extract_orientation_features, forward, forward_raw,
    fuse_and_generate, fuse_raw, residual_gcn, start_gcn, window_inputs, BoundParams,
    OUTPUT_NORM_EPS,
};
pub use params::{param_count, param_shapes, Pose2GazeParams};

use crate::error::{Error, Result};
use crate::motiondata::SampleWindow;
use crate::ndops::{Tape, Tensor};

/// A configured network together with its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Pose2Gaze {
    pub config: ModelConfig,
    pub params: Pose2GazeParams,
}

impl Pose2Gaze {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        let params = Pose2GazeParams::init(&config, seed)?;
        Ok(Self { config, params })
    }

    pub fn from_parts(config: ModelConfig, params: Pose2GazeParams) -> Result<Self> {
        config.validate()?;
        params.check(&config)?;
        Ok(Self { config, params })
    }

    pub fn param_count(&self) -> usize {
        self.params.count()
    }

    /// Unit gaze columns for one window; a degenerate output column is an
    /// error.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        window: &SampleWindow,
        training: bool,
        rng: &mut R,
    ) -> Result<Tensor> {
        let (head, pose) = window_inputs(&self.config, window)?;
        let mut tape = Tape::new();
        let p = BoundParams::bind(&mut tape, &self.params, false);
        let (h, x) = (tape.constant(head), tape.constant(pose));
        let out = forward(&mut tape, &self.config, &p, h, x, training, rng)?;
        Ok(tape.value(out).clone())
    }

    /// Inference-mode prediction. A column too short to normalize takes the
    /// direction of the previous column (or the next usable one for the
    /// first column) and a warning is logged.
    pub fn predict(&self, window: &SampleWindow) -> Result<Tensor> {
        let (head, pose) = window_inputs(&self.config, window)?;
        let mut tape = Tape::new();
        let p = BoundParams::bind(&mut tape, &self.params, false);
        let (h, x) = (tape.constant(head), tape.constant(pose));
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let raw = forward_raw(&mut tape, &self.config, &p, h, x, false, &mut rng)?;
        normalize_lenient(
            tape.value(raw),
            &window.source.recording,
            window.source.anchor,
        )
    }

    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        checkpoint::save(&self.config, &self.params, path)
    }

    pub fn load_checkpoint(path: &Path) -> Result<Self> {
        let (config, params) = checkpoint::load(path)?;
        Ok(Self { config, params })
    }
}

fn normalize_lenient(raw: &Tensor, rec: &str, anchor: usize) -> Result<Tensor> {
    let t = raw.shape()[1];
    let col = |j: usize| [raw.at2(0, j), raw.at2(1, j), raw.at2(2, j)];
    let unit = |v: [f64; 3]| {
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        (n >= OUTPUT_NORM_EPS).then(|| [v[0] / n, v[1] / n, v[2] / n])
    };
    let mut cols: Vec<Option<[f64; 3]>> = (0..t).map(|j| unit(col(j))).collect();
    let first = cols.iter().position(Option::is_some).ok_or_else(|| {
        Error::Degenerate(format!(
            "every generated column is degenerate ({rec}, anchor {anchor})"
        ))
    })?;
    for j in 0..t {
        if cols[j].is_none() {
            log::warn!("degenerate gaze column {j} ({rec}, anchor {anchor}); reusing neighbour");
            cols[j] = if j == 0 { cols[first] } else { cols[j - 1] };
        }
    }
    let mut data = vec![0.0; 3 * t];
    for (j, c) in cols.iter().enumerate() {
        let c = c.expect("filled above");
        for r in 0..3 {
            data[r * t + j] = c[r];
        }
    }
    Tensor::new(vec![3, t], data)
}
