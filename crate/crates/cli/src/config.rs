//! Run configuration: one TOML file with a section per module. Flags
//! override file values, which override the defaults.

use std::path::Path;

use epifuse::assim::EnkfConfig;
use epifuse::data::SynthConfig;
use epifuse::harness::{CvConfig, KernelRecoveryConfig, TrainConfig, TwinConfig};
use serde::{Deserialize, Serialize};

use crate::error::{file_error, CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub synth: SynthConfig,
    pub train: TrainConfig,
    pub enkf: EnkfConfig,
    pub cv: CvConfig,
    pub baseline: BaselineConfig,
    pub twin: TwinConfig,
    pub kernel_recovery: KernelRecoveryConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            synth: SynthConfig::default(),
            train: TrainConfig::default(),
            enkf: EnkfConfig::default(),
            cv: CvConfig::default(),
            baseline: BaselineConfig::default(),
            twin: TwinConfig::default(),
            kernel_recovery: KernelRecoveryConfig::default(),
        }
    }
}

/// Settings of the stochastic network baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub network_nodes: usize,
    pub mean_degree: f64,
    pub initial_infected: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            network_nodes: 2000,
            mean_degree: 10.0,
            initial_infected: 10,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| file_error(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}
