use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::mae;

/// Model predictions scored against ground truth over the same days.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub days: Vec<usize>,
    pub truth: Vec<f64>,
    pub models: Vec<(String, Vec<f64>)>,
    pub mae: Vec<(String, f64)>,
}

pub fn compare_models(days: &[usize], truth: &[f64], models: &[(String, Vec<f64>)]) -> Result<Comparison> {
    if days.len() != truth.len() {
        return Err(Error::Alignment(format!(
            "{} days vs {} truth values",
            days.len(),
            truth.len()
        )));
    }
    let mut scores = Vec::with_capacity(models.len());
    for (name, preds) in models {
        if preds.len() != truth.len() {
            return Err(Error::Alignment(format!(
                "model '{name}' has {} predictions for {} days",
                preds.len(),
                truth.len()
            )));
        }
        scores.push((name.clone(), mae(preds, truth)?));
    }
    Ok(Comparison {
        days: days.to_vec(),
        truth: truth.to_vec(),
        models: models.to_vec(),
        mae: scores,
    })
}

impl Comparison {
    pub fn mae_of(&self, model: &str) -> Option<f64> {
        self.mae.iter().find(|(n, _)| n == model).map(|(_, v)| *v)
    }

    /// `model,mae` rows.
    pub fn table_csv(&self) -> String {
        let mut out = String::from("model,mae\n");
        for (name, v) in &self.mae {
            let _ = writeln!(out, "{name},{v:.6}");
        }
        out
    }

    /// `day,truth,<model>...` rows for external plotting.
    pub fn plot_csv(&self) -> String {
        let mut out = String::from("day,truth");
        for (name, _) in &self.models {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for (k, (day, t)) in self.days.iter().zip(&self.truth).enumerate() {
            let _ = write!(out, "{day},{t:.6}");
            for (_, p) in &self.models {
                let _ = write!(out, ",{:.6}", p[k]);
            }
            out.push('\n');
        }
        out
    }

    pub fn write(&self, table: &Path, plot: &Path) -> Result<()> {
        fs::write(table, self.table_csv()).map_err(|e| Error::file(table, e.to_string()))?;
        fs::write(plot, self.plot_csv()).map_err(|e| Error::file(plot, e.to_string()))?;
        Ok(())
    }
}
