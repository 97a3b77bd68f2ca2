use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coordination::{GridConfig, DEFAULT_WORLD_UP};
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::motiondata::{Setting, SynthConfig, DEFAULT_SEQ_LEN};
use crate::trainer::TrainConfig;

/// Which part of each recording evaluation and prediction use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalSplit {
    /// The held-out tail after `train_fraction`.
    Test,
    /// Every frame.
    All,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// Manifest files or directories searched recursively for `manifest.json`.
    pub recordings: Vec<PathBuf>,
    /// Leading fraction of each recording used for training.
    pub train_fraction: f64,
    pub stride: usize,
    pub eval_stride: usize,
    pub eval_split: EvalSplit,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            recordings: Vec::new(),
            train_fraction: 0.8,
            stride: 1,
            eval_stride: 1,
            eval_split: EvalSplit::Test,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub count: usize,
    pub joints: usize,
    pub frames: usize,
    pub fps: f64,
    pub lag_frames: i64,
    pub noise_deg: f64,
    pub partner: bool,
    pub motion_weight: f64,
    pub dominant_joint: Option<usize>,
    pub activity: String,
}

impl Default for SynthSection {
    fn default() -> Self {
        let s = SynthConfig::default();
        Self {
            count: 1,
            joints: s.joints,
            frames: s.frames,
            fps: s.fps,
            lag_frames: s.lag_frames,
            noise_deg: s.noise_deg,
            partner: s.partner,
            motion_weight: s.motion_weight,
            dominant_joint: s.dominant_joint,
            activity: s.activity,
        }
    }
}

impl SynthSection {
    pub fn to_synth_config(&self) -> SynthConfig {
        SynthConfig {
            joints: self.joints,
            frames: self.frames,
            fps: self.fps,
            lag_frames: self.lag_frames,
            noise_deg: self.noise_deg,
            partner: self.partner,
            motion_weight: self.motion_weight,
            dominant_joint: self.dominant_joint,
            activity: self.activity.clone(),
            skeleton: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    pub lag_range_ms: (f64, f64),
    pub sigma_deg: f64,
    pub grid: GridConfig,
    pub kmeans_k: usize,
    pub kmeans_max_iter: usize,
    pub world_up: [f64; 3],
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            lag_range_ms: (-1000.0, 1000.0),
            sigma_deg: 1.0,
            grid: GridConfig::default(),
            kmeans_k: 128,
            kmeans_max_iter: 100,
            world_up: DEFAULT_WORLD_UP,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub seq_len: usize,
    pub ori_channels: usize,
    pub latent_dim: usize,
    pub residual_blocks: usize,
    pub fusion_channels: usize,
    pub dropout: f64,
    pub use_dct: bool,
    pub use_sgcn: bool,
    pub use_tgcn: bool,
    pub use_pose: bool,
    pub use_partner: bool,
    pub use_head: bool,
}

impl Default for ModelSection {
    fn default() -> Self {
        let m = ModelConfig::default();
        Self {
            seq_len: DEFAULT_SEQ_LEN,
            ori_channels: m.ori_channels,
            latent_dim: m.latent_dim,
            residual_blocks: m.residual_blocks,
            fusion_channels: m.fusion_channels,
            dropout: m.dropout,
            use_dct: m.use_dct,
            use_sgcn: m.use_sgcn,
            use_tgcn: m.use_tgcn,
            use_pose: m.use_pose,
            use_partner: m.use_partner,
            use_head: m.use_head,
        }
    }
}

impl ModelSection {
    pub fn to_model_config(&self, n_joints: usize, partner: bool) -> ModelConfig {
        ModelConfig {
            n_joints,
            partner,
            seq_len: self.seq_len,
            ori_channels: self.ori_channels,
            latent_dim: self.latent_dim,
            residual_blocks: self.residual_blocks,
            fusion_channels: self.fusion_channels,
            dropout: self.dropout,
            use_dct: self.use_dct,
            use_sgcn: self.use_sgcn,
            use_tgcn: self.use_tgcn,
            use_pose: self.use_pose,
            use_partner: self.use_partner,
            use_head: self.use_head,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub lr0: f64,
    pub decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub eval_every: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            lr0: t.lr0,
            decay: t.decay,
            batch_size: t.batch_size,
            epochs: t.epochs,
            eval_every: t.eval_every,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// Defaults to `<out>/checkpoint.json`.
    pub checkpoint: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblateSection {
    /// Variant labels; empty means the full model and every applicable
    /// ablation.
    pub variants: Vec<String>,
}

/// Every parameter of a run. Loaded from TOML, then overridden by flags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub setting: Setting,
    pub skeleton: Option<String>,
    pub data: DataSection,
    pub synth: SynthSection,
    pub analysis: AnalysisSection,
    pub model: ModelSection,
    pub train: TrainSection,
    pub eval: EvalSection,
    pub ablate: AblateSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("out"),
            setting: Setting::Present,
            skeleton: None,
            data: DataSection::default(),
            synth: SynthSection::default(),
            analysis: AnalysisSection::default(),
            model: ModelSection::default(),
            train: TrainSection::default(),
            eval: EvalSection::default(),
            ablate: AblateSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            Error::Config(format!(
                "{}: {}",
                origin.display(),
                e.to_string().trim_end()
            ))
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            lr0: self.train.lr0,
            decay: self.train.decay,
            batch_size: self.train.batch_size,
            epochs: self.train.epochs,
            seed: self.seed,
            setting: self.setting,
            eval_every: self.train.eval_every,
        }
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.eval
            .checkpoint
            .clone()
            .unwrap_or_else(|| self.out.join("checkpoint.json"))
    }
}
