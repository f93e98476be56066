//! Optional TOML overrides shared by all subcommands.

use std::path::Path;

use prnu_core::dataset::PartitionSizes;
use prnu_core::denoise::DenoiseConfig;
use prnu_core::eval::EvalConfig;
use prnu_core::fingerprint::{NuaConfig, SaturationRule};
use prnu_core::matching::MatchConfig;
use prnu_core::sim::CorpusConfig;
use serde::{Deserialize, Serialize};

use crate::commands::Failure;

/// Every table is optional; missing keys keep their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub denoise: DenoiseConfig,
    pub nua: NuaConfig,
    #[serde(rename = "match")]
    pub matching: MatchConfig,
    pub saturation: SaturationRule,
    pub n_resamples: usize,
    pub sizes: PartitionSizes,
    pub corpus: CorpusConfig,
}

impl Default for ConfigFile {
    fn default() -> Self {
        let eval = EvalConfig::default();
        ConfigFile {
            denoise: eval.denoise,
            nua: eval.nua,
            matching: eval.matching,
            saturation: eval.saturation,
            n_resamples: eval.n_resamples,
            sizes: eval.sizes,
            corpus: CorpusConfig::default(),
        }
    }
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(ConfigFile::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::domain("io", format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Failure::usage(format!("config {}: {}", path.display(), e.message())))
    }

    pub fn eval(&self) -> EvalConfig {
        EvalConfig {
            denoise: self.denoise.clone(),
            nua: self.nua.clone(),
            matching: self.matching.clone(),
            saturation: self.saturation.clone(),
            n_resamples: self.n_resamples,
            sizes: self.sizes,
        }
    }
}
