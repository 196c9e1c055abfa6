use std::path::Path;

use epifuse::harness::{donor_grid_search, temporal_architecture_grid, DonorKind, GridSpec};
use serde_json::json;

use super::{load_dataset, require_file, usage};
use crate::config::RunConfig;
use crate::error::{file_error, Context, Result};
use crate::manifest::Manifest;
use crate::{GridArgs, ModelArg};

/// A grid file: `.json`, otherwise TOML, holding `axes = [{ name, values }]`
/// and an optional `budget`.
pub fn load_grid(path: &Path) -> Result<GridSpec> {
    require_file(path, "grid file")?;
    let text = std::fs::read_to_string(path).map_err(|e| file_error(path, e))?;
    if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| file_error(path, e))
    } else {
        toml::from_str(&text).map_err(|e| file_error(path, e))
    }
}

pub fn grid(config: &mut RunConfig, args: &GridArgs, out: &Path) -> Result<()> {
    let kind = match args.model {
        ModelArg::Temporal => DonorKind::Temporal,
        ModelArg::Spatial => DonorKind::Spatial,
        _ => return Err(usage("grid search runs on a single donor: --model temporal|spatial")),
    };
    if let Some(k) = args.folds {
        config.cv.folds = k;
    }
    let spec = match &args.grid {
        Some(p) => load_grid(p)?,
        None => temporal_architecture_grid(),
    };
    spec.validate().ctx("harness", "grid")?;
    let ds = load_dataset(&args.data, config)?;
    let report =
        donor_grid_search(&ds, kind, &spec, &config.train, &config.cv, config.seed).ctx("harness", "grid_search")?;
    let stem = format!("grid_{}", kind.label().to_lowercase().replace('-', "_"));
    report.write(out, &stem).ctx("harness", "write_report")?;
    print!("{}", report.to_text());

    let mut manifest = Manifest::new(
        "grid",
        config,
        json!({ "model": format!("{kind:?}").to_lowercase(), "folds": args.folds, "grid": spec }),
    );
    manifest.input_dir("data", &args.data)?;
    for ext in ["csv", "txt", "json"] {
        manifest.output(out, &format!("{stem}.{ext}"))?;
    }
    manifest.write(out)
}
