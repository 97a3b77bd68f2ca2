use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motiondata::DEFAULT_SEQ_LEN;

/// Architecture sizes and ablation switches.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// Joints of one person.
    pub n_joints: usize,
    /// Whether input windows carry the interaction partner's joints.
    pub partner: bool,
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

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            n_joints: 21,
            partner: false,
            seq_len: DEFAULT_SEQ_LEN,
            ori_channels: 32,
            latent_dim: 16,
            residual_blocks: 4,
            fusion_channels: 64,
            dropout: 0.3,
            use_dct: true,
            use_sgcn: true,
            use_tgcn: true,
            use_pose: true,
            use_partner: true,
            use_head: true,
        }
    }
}

impl ModelConfig {
    pub fn new(n_joints: usize, partner: bool) -> Self {
        Self {
            n_joints,
            partner,
            ..Self::default()
        }
    }

    /// Nodes of the spatial graph: own joints, plus the partner's when
    /// present and enabled.
    pub fn graph_nodes(&self) -> usize {
        if self.partner && self.use_partner {
            2 * self.n_joints
        } else {
            self.n_joints
        }
    }

    /// Joint count of the windows this model consumes.
    pub fn window_joints(&self) -> usize {
        if self.partner {
            2 * self.n_joints
        } else {
            self.n_joints
        }
    }

    /// Input channels of the first fusion convolution.
    pub fn fusion_inputs(&self) -> usize {
        let mot = if self.use_pose {
            self.latent_dim * self.graph_nodes()
        } else {
            0
        };
        let ori = if self.use_head { self.ori_channels } else { 0 };
        mot + ori
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !self.use_pose && !self.use_head {
            return bad("use_pose and use_head are both false: the model has no input".into());
        }
        if self.seq_len < 3 {
            return bad(format!("seq_len must be at least 3, got {}", self.seq_len));
        }
        if self.n_joints == 0 {
            return bad("n_joints must be positive".into());
        }
        for (name, v) in [
            ("ori_channels", self.ori_channels),
            ("latent_dim", self.latent_dim),
            ("fusion_channels", self.fusion_channels),
        ] {
            if v < 2 {
                return bad(format!("{name} must be at least 2 for layer norm, got {v}"));
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        Ok(())
    }
}
