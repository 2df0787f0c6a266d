//! Human-editable experiment config file (TOML).
//!
//! ```toml
//! [experiment]
//! id = "SF"
//! cycle_period_ns = 1000000
//! phase_duration_s = 300.0
//! gap_s = 5.0
//! backend = "sim"
//! architecture = "single_core"
//!
//! [experiment.scheduler]
//! policy = "fifo"
//! priority = 99
//!
//! [experiment.attack]
//! kind = "syn_flood"
//! rate_pps = 100000
//!
//! [experiment.stress]
//! enabled = false
//! workers = 0
//! pinning = []
//!
//! [sim]               # optional; defaults apply
//! rng_seed = 1
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ExperimentConfig;
use crate::sim::SimParams;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("config file: {0}")]
    Toml(String),
    #[error("config invalid: {0}")]
    Invalid(#[from] crate::model::ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigFile {
    pub experiment: ExperimentConfig,
    #[serde(default)]
    pub sim: SimParams,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: ConfigFile = toml::from_str(text).map_err(|e| ConfigError::Toml(e.to_string()))?;
        cfg.experiment.validate()?;
        cfg.sim.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn save(&self, path: &Path) -> Result<(), ConfigError> {
        fs::write(path, self.to_toml())?;
        Ok(())
    }
}
