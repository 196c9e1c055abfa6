//! Subcommand implementations. Each one writes its outputs plus `run.json`
//! into the output directory.

mod assimilate;
mod baseline;
mod compare;
mod grid;
mod report;
mod synth;
mod train;

use std::path::Path;

use epifuse::data::{Dataset, FrameFormat, GridShape};
use epifuse::forecast::store::load_fused;
use epifuse::forecast::{DonorConfig, FusedModel, Scalers};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{file_error, CliError, Context, Result};

pub use assimilate::assimilate;
pub use baseline::baseline;
pub use compare::compare;
pub use grid::grid;
pub use report::report;
pub use synth::synth;
pub use train::train;

/// Written next to a synthetic dataset so later commands know its grid.
pub const DATASET_META: &str = "dataset.json";
pub const TRAIN_REPORT: &str = "train_report.json";
pub const FUSED_FILE: &str = "fused.epif";
pub const TEMPORAL_FILE: &str = "temporal.epif";
pub const SPATIAL_FILE: &str = "spatial.epif";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub grid: GridShape,
    pub start: chrono::NaiveDate,
    pub days: usize,
    pub frame_format: FrameFormat,
}

/// Loads a dataset directory; the grid comes from its `dataset.json` when
/// present, else from the `[synth]` section.
pub fn load_dataset(dir: &Path, config: &RunConfig) -> Result<Dataset> {
    let meta = dir.join(DATASET_META);
    let grid = if meta.exists() {
        read_json::<DatasetMeta>(&meta)?.grid
    } else {
        config.synth.grid
    };
    Dataset::load(dir, grid).ctx("data", "load_dataset")
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| file_error(path, e))?;
    serde_json::from_str(&text).map_err(|e| file_error(path, e))
}

pub fn write_json<T: Serialize>(out: &Path, name: &str, value: &T) -> Result<()> {
    let path = out.join(name);
    let text = serde_json::to_string_pretty(value).expect("serializable") + "\n";
    std::fs::write(&path, text).map_err(|e| file_error(&path, e))
}

pub fn require_file(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(file_error(path, format!("{what} not found")))
    }
}

/// A trained fused model with its scalers and temporal window.
pub struct LoadedModel {
    pub model: FusedModel,
    pub scalers: Scalers,
    pub window: usize,
}

pub fn load_model(path: &Path) -> Result<LoadedModel> {
    require_file(path, "fused model file")?;
    let (model, scalers) = load_fused(path).ctx("forecast", "load_fused")?;
    let scalers = scalers.ok_or_else(|| file_error(path, "model file carries no scalers"))?;
    let window = match &model.temporal.config {
        DonorConfig::Temporal(c) => c.window_size,
        DonorConfig::Spatial(_) => return Err(file_error(path, "first donor is not a temporal CNN")),
    };
    Ok(LoadedModel { model, scalers, window })
}

/// Warns when a model's scalers differ from those refitted on `data`.
pub fn check_scalers(saved: &Scalers, fitted: &Scalers) {
    if saved != fitted {
        log::warn!("model scalers differ from the dataset's training range; was it trained on other data?");
    }
}

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}
