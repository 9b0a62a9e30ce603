//! TOML experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::{FlowConfig, Method, SyntheticConfig};
use crate::error::{Error, Result};
use crate::losses::LossKind;
use crate::policy::VocabSpec;
use crate::rewards::RewardConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowSection {
    pub method: Method,
    pub step_size: f64,
    pub total_time: f64,
    pub snapshot_every: f64,
    pub loss: LossKind,
}

impl Default for FlowSection {
    fn default() -> Self {
        Self {
            method: Method::Rk4,
            step_size: 1e-3,
            total_time: 10.0,
            snapshot_every: 1.0,
            loss: LossKind::Alphapo,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSection {
    pub prompt_classes: usize,
    pub examples: usize,
    pub min_response_len: usize,
    pub negative_margin_fraction: f64,
    pub init_scale: f64,
}

impl Default for SyntheticSection {
    fn default() -> Self {
        let d = SyntheticConfig::default();
        Self {
            prompt_classes: d.prompt_classes,
            examples: d.examples,
            min_response_len: d.min_response_len,
            negative_margin_fraction: d.negative_margin_fraction,
            init_scale: d.init_scale,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub alpha: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            alpha: vec![-2.0, -1.0, 0.0, 0.25, 1.0, 2.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurfaceSection {
    pub beta: f64,
    pub gamma: f64,
    pub log_prob_w: f64,
    pub log_prob_l: f64,
    pub alpha: Vec<f64>,
    pub length: Vec<usize>,
}

impl Default for SurfaceSection {
    fn default() -> Self {
        Self {
            beta: 5.0,
            gamma: 0.0,
            log_prob_w: -5.0,
            log_prob_l: -10.0,
            alpha: (-50..=50).map(f64::from).collect(),
            length: (1..=10).collect(),
        }
    }
}

/// Everything a command reads, after CLI overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub reward: RewardConfig,
    pub flow: FlowSection,
    pub vocab: VocabSpec,
    pub synthetic: SyntheticSection,
    pub sweep: SweepSection,
    pub surface: SurfaceSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let syn = SyntheticConfig::default();
        Self {
            seed: syn.seed,
            output_dir: PathBuf::from("out"),
            reward: RewardConfig::default(),
            flow: FlowSection::default(),
            vocab: syn.vocab,
            synthetic: SyntheticSection::default(),
            sweep: SweepSection::default(),
            surface: SurfaceSection::default(),
        }
    }
}

fn check_increasing<T: PartialOrd + Copy>(name: &str, grid: &[T]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Config(format!("{name} grid is empty")));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Config(format!("{name} grid must be strictly increasing")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 of the resolved configuration, hex encoded. The output
    /// directory is left out so reruns elsewhere stamp the same hash.
    pub fn hash(&self) -> Result<String> {
        let mut content = self.clone();
        content.output_dir = PathBuf::new();
        let digest = Sha256::digest(content.to_toml()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn flow_config(&self) -> FlowConfig {
        FlowConfig {
            method: self.flow.method,
            step_size: self.flow.step_size,
            total_time: self.flow.total_time,
            snapshot_every: self.flow.snapshot_every,
            loss: self.flow.loss,
            reward: self.reward,
            seed: self.seed,
        }
    }

    pub fn synthetic_config(&self) -> SyntheticConfig {
        SyntheticConfig {
            vocab: self.vocab,
            prompt_classes: self.synthetic.prompt_classes,
            examples: self.synthetic.examples,
            min_response_len: self.synthetic.min_response_len,
            negative_margin_fraction: self.synthetic.negative_margin_fraction,
            init_scale: self.synthetic.init_scale,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.flow_config().validate()?;
        self.synthetic_config().validate()?;
        check_increasing("sweep alpha", &self.sweep.alpha)?;
        check_increasing("surface alpha", &self.surface.alpha)?;
        check_increasing("surface length", &self.surface.length)?;
        if self.surface.length[0] == 0 {
            return Err(Error::Config("surface lengths must be >= 1".into()));
        }
        if self.sweep.alpha.iter().chain(&self.surface.alpha).any(|a| !a.is_finite()) {
            return Err(Error::Config("alpha grids must be finite".into()));
        }
        RewardConfig::new(0.0, self.surface.beta, self.surface.gamma)?;
        for (name, lp) in [("log_prob_w", self.surface.log_prob_w), ("log_prob_l", self.surface.log_prob_l)] {
            if !(lp.is_finite() && lp <= 0.0) {
                return Err(Error::Config(format!("surface {name} must be finite and <= 0")));
            }
        }
        Ok(())
    }
}
