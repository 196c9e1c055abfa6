//! Cartesian grid search with per-point failure capture.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cv::CvResult;
use super::report::{ExperimentReport, Provenance, ReportRow};
use crate::error::{Error, Result};

/// One named axis. Values are kept as text and parsed by the evaluator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub name: String,
    pub values: Vec<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub axes: Vec<Axis>,
    /// Upper bound on the number of points; larger grids are rejected.
    #[serde(default)]
    pub budget: Option<usize>,
}

/// One grid point, in axis order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint(pub Vec<(String, serde_json::Value)>);

impl GridPoint {
    pub fn get(&self, name: &str) -> Result<&serde_json::Value> {
        self.0
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v)
            .ok_or_else(|| Error::config(format!("grid point has no axis '{name}'")))
    }

    pub fn usize(&self, name: &str) -> Result<usize> {
        self.get(name)?
            .as_u64()
            .map(|v| v as usize)
            .ok_or_else(|| Error::config(format!("axis '{name}' must hold non-negative integers")))
    }

    pub fn f64(&self, name: &str) -> Result<f64> {
        self.get(name)?
            .as_f64()
            .ok_or_else(|| Error::config(format!("axis '{name}' must hold numbers")))
    }

    pub fn str(&self, name: &str) -> Result<&str> {
        self.get(name)?
            .as_str()
            .ok_or_else(|| Error::config(format!("axis '{name}' must hold strings")))
    }

    /// Cell text for each value, in axis order.
    pub fn cells(&self) -> Vec<String> {
        self.0
            .iter()
            .map(|(_, v)| match v {
                serde_json::Value::String(s) => s.clone(),
                other => other.to_string(),
            })
            .collect()
    }
}

impl GridSpec {
    pub fn new(axes: Vec<(&str, Vec<serde_json::Value>)>) -> Self {
        Self {
            axes: axes
                .into_iter()
                .map(|(name, values)| Axis {
                    name: name.to_string(),
                    values,
                })
                .collect(),
            budget: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.axes.is_empty() || self.axes.iter().any(|a| a.values.is_empty()) {
            return Err(Error::config("grid needs at least one axis and no empty axes"));
        }
        for (i, a) in self.axes.iter().enumerate() {
            if self.axes[..i].iter().any(|b| b.name == a.name) {
                return Err(Error::config(format!("axis '{}' listed twice", a.name)));
            }
        }
        if let Some(b) = self.budget {
            if self.len() > b {
                return Err(Error::config(format!("grid has {} points, budget is {b}", self.len())));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.values.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All points, last axis varying fastest.
    pub fn points(&self) -> Vec<GridPoint> {
        let mut out = vec![GridPoint(Vec::new())];
        for axis in &self.axes {
            out = out
                .into_iter()
                .flat_map(|p| {
                    axis.values.iter().map(move |v| {
                        let mut q = p.0.clone();
                        q.push((axis.name.clone(), v.clone()));
                        GridPoint(q)
                    })
                })
                .collect();
        }
        out
    }
}

/// What an evaluator returns for one point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointScore {
    pub mae: f64,
    pub std: Option<f64>,
    pub fold_maes: Vec<f64>,
    /// Model size, used to break MAE ties.
    pub parameter_count: usize,
    pub per_target: Vec<(String, f64)>,
}

impl PointScore {
    pub fn from_cv(cv: CvResult, parameter_count: usize) -> Self {
        Self {
            mae: cv.mean,
            std: Some(cv.std),
            fold_maes: cv.fold_maes,
            parameter_count,
            per_target: Vec::new(),
        }
    }

    pub fn single(mae: f64, parameter_count: usize) -> Self {
        Self {
            mae,
            std: None,
            fold_maes: Vec::new(),
            parameter_count,
            per_target: Vec::new(),
        }
    }
}

/// Evaluates every point (in parallel), records failures as rows and sorts.
/// Each axis becomes one report column.
pub fn grid_search<F>(
    title: &str,
    columns: &[&str],
    grid: &GridSpec,
    provenance: Provenance,
    evaluate: F,
) -> Result<ExperimentReport>
where
    F: Fn(&GridPoint) -> Result<PointScore> + Sync,
{
    if columns.len() != grid.axes.len() {
        return Err(Error::config(format!(
            "{} report columns for {} grid axes",
            columns.len(),
            grid.axes.len()
        )));
    }
    grid_search_with(title, columns, grid, provenance, GridPoint::cells, evaluate)
}

/// [`grid_search`] with a custom mapping from point to report cells.
pub fn grid_search_with<C, F>(
    title: &str,
    columns: &[&str],
    grid: &GridSpec,
    provenance: Provenance,
    cells: C,
    evaluate: F,
) -> Result<ExperimentReport>
where
    C: Fn(&GridPoint) -> Vec<String> + Sync,
    F: Fn(&GridPoint) -> Result<PointScore> + Sync,
{
    grid.validate()?;
    let rows: Vec<ReportRow> = grid
        .points()
        .par_iter()
        .map(|p| match evaluate(p) {
            Ok(s) => ReportRow {
                cells: cells(p),
                mae: Some(s.mae),
                std: s.std,
                fold_maes: s.fold_maes,
                per_target: s.per_target,
                parameter_count: s.parameter_count,
                error: None,
            },
            Err(e) => {
                log::warn!("grid point {:?} failed: {e}", p.cells());
                ReportRow::failed(cells(p), e.to_string())
            }
        })
        .collect();
    let mut report = ExperimentReport::new(title, columns, provenance);
    for r in rows {
        report.push(r)?;
    }
    report.sort();
    Ok(report)
}
