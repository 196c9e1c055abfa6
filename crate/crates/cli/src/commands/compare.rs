use std::collections::HashMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use epifuse::baselines::compare_models;
use epifuse::Error;
use serde_json::json;

use super::{load_dataset, require_file, usage};
use crate::config::RunConfig;
use crate::error::{file_error, CliError, Context, Result};
use crate::manifest::Manifest;
use crate::CompareArgs;

pub const TABLE: &str = "comparison.csv";
pub const PLOT: &str = "comparison_plot.csv";

/// Case columns tried in order.
const VALUE_COLUMNS: [&str; 5] = ["forecast_cases", "reported_cases", "daily_cases", "cases", "value"];
const DATE_COLUMNS: [&str; 2] = ["date", "day"];

fn parse_spec(spec: &str) -> Result<(String, PathBuf)> {
    match spec.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => Ok((name.to_string(), PathBuf::from(path))),
        _ => Err(usage(format!("--predictions expects NAME=PATH, got '{spec}'"))),
    }
}

/// Date → value rows of a prediction file; rows with an empty value are skipped.
fn read_predictions(path: &Path) -> Result<Vec<(NaiveDate, f64)>> {
    require_file(path, "prediction file")?;
    let mut r = csv::Reader::from_path(path).map_err(|e| file_error(path, e))?;
    let headers = r.headers().map_err(|e| file_error(path, e))?.clone();
    let find = |names: &[&str]| names.iter().find_map(|n| headers.iter().position(|h| h == *n));
    let date_col = find(&DATE_COLUMNS).ok_or_else(|| file_error(path, "no 'date' column"))?;
    let value_col = find(&VALUE_COLUMNS)
        .ok_or_else(|| file_error(path, format!("no case column (one of {})", VALUE_COLUMNS.join(", "))))?;
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| file_error(path, e))?;
        let row = i + 2;
        let value = rec.get(value_col).unwrap_or("").trim();
        if value.is_empty() {
            continue;
        }
        let date = NaiveDate::parse_from_str(rec.get(date_col).unwrap_or("").trim(), "%Y-%m-%d")
            .map_err(|e| file_error(path, format!("row {row}: bad date: {e}")))?;
        let value: f64 = value
            .parse()
            .map_err(|_| file_error(path, format!("row {row}: bad number '{value}'")))?;
        rows.push((date, value));
    }
    if rows.is_empty() {
        return Err(file_error(path, "no predictions"));
    }
    Ok(rows)
}

fn alignment(msg: String) -> CliError {
    CliError::Core {
        module: "baselines",
        op: "compare",
        source: Error::Alignment(msg),
    }
}

pub fn compare(config: &RunConfig, args: &CompareArgs, out: &Path) -> Result<()> {
    let specs = args
        .predictions
        .iter()
        .map(|s| parse_spec(s))
        .collect::<Result<Vec<_>>>()?;
    let ds = load_dataset(&args.data, config)?;
    let index: HashMap<NaiveDate, usize> = ds.truth.iter().enumerate().map(|(i, g)| (g.date, i)).collect();

    let mut files = Vec::with_capacity(specs.len());
    for (name, path) in &specs {
        files.push((name.clone(), read_predictions(path)?));
    }
    let dates: Vec<NaiveDate> = files[0].1.iter().map(|(d, _)| *d).collect();
    let mut days = Vec::with_capacity(dates.len());
    for d in &dates {
        days.push(
            *index
                .get(d)
                .ok_or_else(|| alignment(format!("{d} of '{}' is not in the dataset", files[0].0)))?,
        );
    }
    let truth: Vec<f64> = days.iter().map(|&i| ds.truth[i].daily_cases as f64).collect();
    let mut models = Vec::with_capacity(files.len());
    for (name, rows) in &files {
        let by_date: HashMap<NaiveDate, f64> = rows.iter().copied().collect();
        let missing: Vec<String> = dates
            .iter()
            .filter(|d| !by_date.contains_key(d))
            .map(|d| d.to_string())
            .collect();
        if !missing.is_empty() {
            let shown = missing.iter().take(5).cloned().collect::<Vec<_>>().join(", ");
            let more = missing.len().saturating_sub(5);
            let tail = if more > 0 {
                format!(" and {more} more")
            } else {
                String::new()
            };
            return Err(alignment(format!(
                "'{name}' has no prediction for {} of {} dates: {shown}{tail}",
                missing.len(),
                dates.len()
            )));
        }
        models.push((name.clone(), dates.iter().map(|d| by_date[d]).collect()));
    }
    let cmp = compare_models(&days, &truth, &models).ctx("baselines", "compare_models")?;
    cmp.write(&out.join(TABLE), &out.join(PLOT))
        .ctx("baselines", "write_comparison")?;
    println!("cases MAE over {} days from {}", dates.len(), dates[0]);
    for (name, m) in &cmp.mae {
        println!("{name:<16} {m:.6}");
    }

    let names: Vec<&str> = specs.iter().map(|(n, _)| n.as_str()).collect();
    let mut manifest = Manifest::new("compare", config, json!({ "predictions": names }));
    manifest.input_dir("data", &args.data)?;
    for (name, path) in &specs {
        manifest.input_file(&format!("predictions:{name}"), path)?;
    }
    manifest.output(out, TABLE)?;
    manifest.output(out, PLOT)?;
    manifest.write(out)
}
