//! Configuration, dataset files, CSV output and the command implementations.

pub mod check;
pub mod commands;
pub mod config;
pub mod dataset;

use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::losses::LossKind;

pub use check::{run_checks, CheckSubject, SuiteResult};
pub use commands::Status;
pub use config::ExperimentConfig;
pub use dataset::{parse_dataset, parse_dataset_str, serialize_dataset};

/// Command-line values that replace configuration keys.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub loss: Option<LossKind>,
}

/// Load `path` (or the defaults) and apply `overrides`. The result is
/// validated.
pub fn resolve_config(path: Option<&Path>, overrides: &Overrides) -> Result<ExperimentConfig> {
    let mut cfg = match path {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(dir) = &overrides.output_dir {
        cfg.output_dir = dir.clone();
    }
    if let Some(seed) = overrides.seed {
        cfg.seed = seed;
    }
    if let Some(a) = overrides.alpha {
        cfg.reward.alpha = a;
    }
    if let Some(b) = overrides.beta {
        cfg.reward.beta = b;
    }
    if let Some(g) = overrides.gamma {
        cfg.reward.gamma = g;
    }
    if let Some(loss) = overrides.loss {
        cfg.flow.loss = loss;
    }
    cfg.validate()?;
    Ok(cfg)
}
