use std::path::Path;

use epifuse::assim::{write_filter_csv, FilterRun, InitMode, Selection};
use epifuse::harness::{Split, TwinHorizon};
use serde::Serialize;
use serde_json::json;

use super::{check_scalers, load_dataset, load_model, write_json, FUSED_FILE};
use crate::config::RunConfig;
use crate::error::{Context, Result};
use crate::manifest::Manifest;
use crate::{AssimilateArgs, InitArg, SelectionArg};

pub const FILTER_CSV: &str = "filter.csv";
pub const SUMMARY: &str = "assimilation.json";

#[derive(Debug, Serialize)]
struct Summary {
    origin: String,
    first: String,
    last: String,
    days: usize,
    /// One-step forecast MAE on the normalized scale, all targets.
    forecast_mae: f64,
    forecast_cases_mae: f64,
    free_run_mae: f64,
}

pub fn assimilate(config: &mut RunConfig, args: &AssimilateArgs, out: &Path) -> Result<()> {
    let enkf = &mut config.enkf;
    if let Some(m) = args.ensemble {
        enkf.ensemble_size = m;
    }
    if let Some(i) = args.init {
        enkf.init_mode = match i {
            InitArg::Zero => InitMode::Zero,
            InitArg::One => InitMode::One,
            InitArg::PreviousState => InitMode::PreviousState,
        };
    }
    if let Some(r) = args.r_scale {
        enkf.r_scale = r;
    }
    if let Some(s) = args.selection {
        enkf.selection = match s {
            SelectionArg::Mean => Selection::Mean,
            SelectionArg::Median => Selection::Median,
        };
    }
    enkf.validate().ctx("assim", "run_filter")?;

    let model_path = args.model_file.clone().unwrap_or_else(|| out.join(FUSED_FILE));
    let loaded = load_model(&model_path)?;
    let ds = load_dataset(&args.data, config)?;
    let targets = loaded.model.targets().to_vec();
    let split = Split::new(&ds, &targets, loaded.window).ctx("assim", "split")?;
    check_scalers(&loaded.scalers, &split.prepared.scalers);

    // observations are the normalized ground truth from the day before the test range
    let origin = split.ranges.test.start - 1;
    let horizon = TwinHorizon::new(&split, origin, 0.0, config.seed).ctx("assim", "horizon")?;
    let (run, all, cases) = horizon
        .filter(&loaded.model, &config.enkf, config.seed)
        .ctx("assim", "run_filter")?;
    let free = horizon.free_run(&loaded.model).ctx("assim", "free_run")?;

    let scored = FilterRun {
        days: run.days[1..].to_vec(),
        ..run
    };
    let dates = &split.prepared.dates;
    let labels: Vec<String> = (origin + 1..dates.len()).map(|d| dates[d].to_string()).collect();
    write_filter_csv(
        &out.join(FILTER_CSV),
        &scored,
        &labels,
        &targets,
        Some(&loaded.scalers.targets),
    )
    .ctx("assim", "write_filter_csv")?;
    let summary = Summary {
        origin: dates[origin].to_string(),
        first: labels[0].clone(),
        last: labels[labels.len() - 1].clone(),
        days: labels.len(),
        forecast_mae: all,
        forecast_cases_mae: cases,
        free_run_mae: free,
    };
    write_json(out, SUMMARY, &summary)?;
    println!(
        "filtered {} days from {}: forecast MAE {:.6}, free run {:.6} (normalized)",
        summary.days, summary.first, all, free
    );

    let mut manifest = Manifest::new(
        "assimilate",
        config,
        json!({
            "ensemble": args.ensemble,
            "init": args.init.map(|i| format!("{i:?}")),
            "r_scale": args.r_scale,
            "selection": args.selection.map(|s| format!("{s:?}")),
        }),
    );
    manifest.input_dir("data", &args.data)?;
    manifest.input_file("model", &model_path)?;
    manifest.output(out, FILTER_CSV)?;
    manifest.output(out, SUMMARY)?;
    manifest.write(out)
}
