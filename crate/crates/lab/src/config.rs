//! TOML run configuration.
//!
//! Top-level keys `seed`, `threads` and `out` set run defaults; every other
//! entry must be a table named after an experiment (or `exponents`) and
//! holding that experiment's parameters. Omitted parameters keep their
//! defaults.
//!
//! ```toml
//! seed = 7
//!
//! [gamma-identity]
//! environments = 200
//! weights = { d = 2, alpha = [0.5, 0.3, 0.4, 0.2] }
//!
//! [exponents]
//! d = 3
//! alpha = [0.12, 0.06, 0.06, 0.04, 0.06, 0.06]
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rwde_core::experiments::{ExperimentConfig, WeightsConfig, EXPERIMENTS};
use serde::Deserialize;

use crate::error::LabError;

pub const EXPONENTS_SECTION: &str = "exponents";

/// Weights used by `exponents` when the configuration has no section.
pub fn default_exponent_weights() -> WeightsConfig {
    WeightsConfig::new(3, &[0.12, 0.06, 0.06, 0.04, 0.06, 0.06])
}

#[derive(Clone, Debug, Default)]
pub struct LabConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    experiments: BTreeMap<String, ExperimentConfig>,
    weights: Option<WeightsConfig>,
}

impl LabConfig {
    pub fn load(path: &Path) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| LabError::Config(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, LabError> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| LabError::Config(e.to_string()))?;
        let mut cfg = LabConfig::default();
        for (key, value) in table {
            match key.as_str() {
                "seed" => cfg.seed = Some(non_negative(&key, &value)?),
                "threads" => {
                    let n = non_negative(&key, &value)?;
                    if n == 0 {
                        return Err(LabError::Config("threads must be at least 1".into()));
                    }
                    cfg.threads = Some(n as usize);
                }
                "out" => match value {
                    toml::Value::String(s) => cfg.out = Some(PathBuf::from(s)),
                    other => {
                        return Err(LabError::Config(format!(
                            "out must be a string, got {}",
                            other.type_str()
                        )))
                    }
                },
                EXPONENTS_SECTION => {
                    let w = WeightsConfig::deserialize(value).map_err(|e| section_error(&key, e))?;
                    cfg.weights = Some(w);
                }
                name if EXPERIMENTS.contains(&name) => {
                    if !value.is_table() {
                        return Err(LabError::Config(format!("[{name}] must be a table")));
                    }
                    let exp = ExperimentConfig::from_section(name, value).map_err(|e| section_error(name, e))?;
                    cfg.experiments.insert(key, exp);
                }
                other => {
                    return Err(LabError::Config(format!(
                        "unknown key {other:?}; expected seed, threads, out, {EXPONENTS_SECTION} or one of {}",
                        EXPERIMENTS.join(", ")
                    )))
                }
            }
        }
        Ok(cfg)
    }

    /// The configured experiment, or its defaults when the file has no
    /// section for it.
    pub fn experiment(&self, name: &str) -> Result<ExperimentConfig, LabError> {
        match self.experiments.get(name) {
            Some(cfg) => Ok(cfg.clone()),
            None => Ok(ExperimentConfig::default_for(name)?),
        }
    }

    pub fn exponent_weights(&self) -> WeightsConfig {
        self.weights.clone().unwrap_or_else(default_exponent_weights)
    }
}

fn non_negative(key: &str, value: &toml::Value) -> Result<u64, LabError> {
    value
        .as_integer()
        .and_then(|v| u64::try_from(v).ok())
        .ok_or_else(|| LabError::Config(format!("{key} must be a non-negative integer")))
}

fn section_error(name: &str, e: toml::de::Error) -> LabError {
    LabError::Config(format!("[{name}]: {}", e.message()))
}
