//! Resolved run configuration. Precedence: flags > config file > defaults.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::SynthConfig;
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::train::TrainConfig;

/// Toy setting used by the gradient check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradcheckConfig {
    pub model: ModelConfig,
    pub k: usize,
    pub seeds: usize,
    pub lambda_rep: f64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        GradcheckConfig {
            model: ModelConfig {
                a: 16,
                d: 16,
                heads: 2,
                layers: 1,
                ..ModelConfig::default()
            },
            k: 4,
            seeds: 1,
            lambda_rep: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub synth: SynthConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub gradcheck: GradcheckConfig,
}

impl RunConfig {
    /// Reads TOML or JSON by extension. A JSON run manifest is also accepted;
    /// its `config` field is used.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let is_json = path.extension().is_some_and(|e| e == "json");
        if is_json {
            let value: serde_json::Value = serde_json::from_str(&text)?;
            let inner = match value.get("config") {
                Some(cfg) if value.get("command").is_some() => cfg.clone(),
                _ => value,
            };
            Ok(serde_json::from_value(inner)?)
        } else {
            toml::from_str(&text).map_err(|e| Error::config("config", e.to_string()))
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.synth.seed = seed;
        self.train.seed = seed;
    }
}
