use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::params::Pose2GazeParams;
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::ndops::Tensor;

pub const CHECKPOINT_FORMAT: &str = "pose2gaze-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct NamedTensor {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    version: u32,
    config: ModelConfig,
    tensors: Vec<NamedTensor>,
}

pub(super) fn save(cfg: &ModelConfig, params: &Pose2GazeParams, path: &Path) -> Result<()> {
    let file = CheckpointFile {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        config: cfg.clone(),
        tensors: params
            .names
            .iter()
            .zip(&params.tensors)
            .map(|(n, t)| NamedTensor {
                name: n.clone(),
                shape: t.shape().to_vec(),
                data: t.data().to_vec(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&file).map_err(|e| Error::Contract(e.to_string()))?;
    write_atomic(path, &json)
}

pub(super) fn load(path: &Path) -> Result<(ModelConfig, Pose2GazeParams)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let file: CheckpointFile =
        serde_json::from_slice(&bytes).map_err(|e| Error::load(path, e.to_string()))?;
    if file.format != CHECKPOINT_FORMAT || file.version != CHECKPOINT_VERSION {
        return Err(Error::load(
            path,
            format!("unsupported checkpoint {} v{}", file.format, file.version),
        ));
    }
    file.config.validate()?;
    let mut names = Vec::new();
    let mut tensors = Vec::new();
    for t in file.tensors {
        names.push(t.name);
        tensors.push(Tensor::new(t.shape, t.data).map_err(|e| Error::load(path, e.to_string()))?);
    }
    let params = Pose2GazeParams { names, tensors };
    params
        .check(&file.config)
        .map_err(|e| Error::load(path, e.to_string()))?;
    Ok((file.config, params))
}
