//! JSON run configuration shared by every CLI subcommand. Unknown keys are
//! rejected; every field has a documented default, so `{}` is a valid config.

use crate::augment::AugmentConfig;
use crate::error::{Error, Result};
use crate::eval::SplitSpec;
use crate::loss::Hyperparams;
use crate::stft::StftConfig;
use crate::synth::SynthConfig;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Downstream classifier settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifierConfig {
    pub lr: f64,
    pub epochs: usize,
    pub l2: f64,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            lr: 0.1,
            epochs: 500,
            l2: 1e-4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub hyperparams: Hyperparams,
    pub augment: AugmentConfig,
    pub stft: StftConfig,
    pub split: SplitSpec,
    pub synth: SynthConfig,
    pub classifier: ClassifierConfig,
    pub clusters: usize,
    pub sample_rate_hz: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            hyperparams: Hyperparams::default(),
            augment: AugmentConfig::default(),
            stft: StftConfig::default(),
            split: SplitSpec::default(),
            synth: SynthConfig::default(),
            classifier: ClassifierConfig::default(),
            clusters: 3,
            sample_rate_hz: 50.0,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("config {}: {e}", path.display())))?;
        cfg.apply_env_seed()?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// `PLC_SEED` overrides every seed in the configuration.
    fn apply_env_seed(&mut self) -> Result<()> {
        if let Ok(text) = std::env::var("PLC_SEED") {
            let seed: u64 = text
                .parse()
                .map_err(|_| Error::Config(format!("PLC_SEED is not an integer: {text:?}")))?;
            self.override_seeds(seed);
        }
        Ok(())
    }

    pub fn override_seeds(&mut self, seed: u64) {
        self.hyperparams.seed = seed;
        self.augment.seed = seed;
        self.split.seed = seed;
        self.synth.seed = seed;
        self.classifier.seed = seed;
    }

    pub fn validate(&self) -> Result<()> {
        self.hyperparams.validate()?;
        self.split.validate()?;
        self.synth.validate()?;
        if self.clusters < 2 {
            return Err(Error::Config(format!(
                "clusters must be at least 2, got {}",
                self.clusters
            )));
        }
        if self.sample_rate_hz <= 0.0 {
            return Err(Error::Config("sample_rate_hz must be positive".into()));
        }
        if self.classifier.lr <= 0.0 || self.classifier.epochs == 0 {
            return Err(Error::Config("classifier lr and epochs must be positive".into()));
        }
        Ok(())
    }
}
