//! JSON checkpoints: format tag, version, model config and named tensors.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{ModelConfig, ModelParams};

pub const CHECKPOINT_FORMAT: &str = "roi-attention-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config: ModelConfig,
    pub tensors: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn new(config: &ModelConfig, params: &ModelParams) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            config: config.clone(),
            tensors: params
                .tensors()
                .into_iter()
                .map(|(name, shape, data)| NamedTensor {
                    name,
                    shape,
                    data: data.to_vec(),
                })
                .collect(),
        }
    }

    /// Rebuilds parameters, checking every name and shape against the config.
    pub fn params(&self) -> Result<ModelParams> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unknown format {:?}", self.format)));
        }
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {}", self.version)));
        }
        self.config.validate()?;
        let mut params = ModelParams::zeros(&self.config);
        let expected: Vec<(String, Vec<usize>)> =
            params.tensors().into_iter().map(|(n, s, _)| (n, s)).collect();
        if expected.len() != self.tensors.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors, found {}",
                expected.len(),
                self.tensors.len()
            )));
        }
        for ((name, shape), t) in expected.iter().zip(&self.tensors) {
            if *name != t.name || *shape != t.shape || t.data.len() != shape.iter().product::<usize>() {
                return Err(Error::Checkpoint(format!(
                    "tensor {:?} {:?} does not match expected {name:?} {shape:?}",
                    t.name, t.shape
                )));
            }
        }
        let flat: Vec<f64> = self.tensors.iter().flat_map(|t| t.data.iter().copied()).collect();
        params.from_flat(&flat)?;
        if !params.is_finite() {
            return Err(Error::NonFinite("checkpoint tensor"));
        }
        Ok(params)
    }
}

pub fn save_checkpoint(path: impl AsRef<Path>, config: &ModelConfig, params: &ModelParams) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string(&Checkpoint::new(config, params))?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(ModelConfig, ModelParams)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let ckpt: Checkpoint = serde_json::from_str(&text)?;
    let params = ckpt.params()?;
    Ok((ckpt.config, params))
}
