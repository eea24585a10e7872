//! Run configuration, read from flat JSON.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::arch::{Architecture, ModelConfig};
use crate::data::{elastic, niblack};
use crate::error::{ensure, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub arch: String,
    pub n: usize,
    pub base_width: usize,
    pub dilation: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub lr_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Training copies per image: the original plus `factor − 1` elastic warps.
    pub augmentation_factor: usize,
    pub folds: usize,
    pub seed: u64,
    /// A dataset directory or `synthetic:<subjects>`.
    pub data_dir: String,
    pub out_dir: PathBuf,
    pub elastic_alpha: f64,
    pub elastic_sigma: f64,
    pub niblack_k: f64,
}

impl Default for RunConfig {
    /// Desk-scale defaults.
    fn default() -> Self {
        RunConfig {
            arch: Architecture::MfpUnet.tag().to_string(),
            n: 64,
            base_width: 4,
            dilation: 2,
            learning_rate: 0.001,
            momentum: 0.9,
            weight_decay: 0.0005,
            lr_decay: 1e-4,
            batch_size: 8,
            epochs: 20,
            augmentation_factor: 10,
            folds: 5,
            seed: 0,
            data_dir: "synthetic:20".to_string(),
            out_dir: PathBuf::from("out"),
            elastic_alpha: elastic::DEFAULT_ALPHA,
            elastic_sigma: elastic::DEFAULT_SIGMA,
            niblack_k: niblack::DEFAULT_K,
        }
    }
}

impl RunConfig {
    /// Clinical-scale settings: N = 512, batch 64, 100 epochs.
    pub fn full_scale_profile() -> Self {
        RunConfig {
            n: 512,
            base_width: 64,
            batch_size: 64,
            epochs: 100,
            ..RunConfig::default()
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("config serializes");
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn architecture(&self) -> Result<Architecture> {
        self.arch.parse()
    }

    pub fn model_config(&self) -> Result<ModelConfig> {
        let mc = ModelConfig::new(self.architecture()?, self.n, self.base_width, self.dilation);
        mc.validate()?;
        Ok(mc)
    }

    pub fn validate(&self) -> Result<()> {
        self.model_config()?;
        for (name, v) in [
            ("learning_rate", self.learning_rate),
            ("momentum", self.momentum),
            ("weight_decay", self.weight_decay),
            ("lr_decay", self.lr_decay),
            ("elastic_sigma", self.elastic_sigma),
        ] {
            ensure!(v > 0.0 && v.is_finite(), "{name} must be positive, got {v}");
        }
        ensure!(self.elastic_alpha >= 0.0, "elastic_alpha must be non-negative");
        ensure!(self.niblack_k.is_finite(), "niblack_k must be finite");
        ensure!(self.batch_size >= 1, "batch_size must be positive");
        ensure!(self.augmentation_factor >= 1, "augmentation_factor must be positive");
        ensure!(self.folds >= 2, "folds must be at least 2, got {}", self.folds);
        Ok(())
    }
}
