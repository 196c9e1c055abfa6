//! Tabular experiment reports: CSV for tools, an aligned text table for
//! people, JSON with fold detail and provenance for reproduction.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ARCHITECTURE_COLUMNS: [&str; 4] = [
    "Kernel Size 1",
    "Kernel Size 2",
    "Number of Filter 1",
    "Number of Filter 2",
];
pub const FUSION_COLUMNS: [&str; 1] = ["Model"];
pub const ENKF_COLUMNS: [&str; 3] = [
    "State initialisation",
    "R: Observation Covariance Matrix",
    "Ensemble Size",
];
pub const ABLATION_COLUMNS: [&str; 1] = ["Model"];
pub const MAE_COLUMN: &str = "MAE";
pub const IMPROVEMENT_COLUMN: &str = "Relative Improvement of the Fused-CNN";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub data_fingerprint: String,
    pub version: String,
    pub protocol: String,
}

impl Provenance {
    pub fn new(seed: u64, data_fingerprint: impl Into<String>, protocol: impl Into<String>) -> Self {
        Self {
            seed,
            data_fingerprint: data_fingerprint.into(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            protocol: protocol.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub cells: Vec<String>,
    /// Mean MAE on the normalized scale; `None` when the point failed.
    pub mae: Option<f64>,
    pub std: Option<f64>,
    pub fold_maes: Vec<f64>,
    /// Per-target MAEs, when the evaluator reports them.
    pub per_target: Vec<(String, f64)>,
    pub parameter_count: usize,
    pub error: Option<String>,
}

impl ReportRow {
    pub fn ok(cells: Vec<String>, mae: f64, parameter_count: usize) -> Self {
        Self {
            cells,
            mae: Some(mae),
            std: None,
            fold_maes: Vec::new(),
            per_target: Vec::new(),
            parameter_count,
            error: None,
        }
    }

    pub fn failed(cells: Vec<String>, error: impl Into<String>) -> Self {
        Self {
            cells,
            mae: None,
            std: None,
            fold_maes: Vec::new(),
            per_target: Vec::new(),
            parameter_count: 0,
            error: Some(error.into()),
        }
    }
}

/// Ascending MAE, failures last; ties by parameter count, then cells.
pub fn compare_rows(a: &ReportRow, b: &ReportRow) -> Ordering {
    let mae = match (a.mae, b.mae) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    };
    mae.then(a.parameter_count.cmp(&b.parameter_count))
        .then_with(|| a.cells.cmp(&b.cells))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<ReportRow>,
    /// Extra trailing column (e.g. relative improvement), one entry per row.
    pub extra: Option<(String, Vec<String>)>,
    pub provenance: Provenance,
    pub notes: Vec<String>,
}

impl ExperimentReport {
    pub fn new(title: impl Into<String>, columns: &[&str], provenance: Provenance) -> Self {
        Self {
            title: title.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            extra: None,
            provenance,
            notes: Vec::new(),
        }
    }

    pub fn push(&mut self, row: ReportRow) -> Result<()> {
        if row.cells.len() != self.columns.len() {
            return Err(Error::shape(
                "report",
                format!("{} cells for {} columns", row.cells.len(), self.columns.len()),
            ));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn sort(&mut self) {
        self.rows.sort_by(compare_rows);
    }

    pub fn best(&self) -> Option<&ReportRow> {
        self.rows
            .iter()
            .filter(|r| r.mae.is_some())
            .min_by(|a, b| compare_rows(a, b))
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = self.columns.clone();
        h.push(MAE_COLUMN.to_string());
        if let Some((name, _)) = &self.extra {
            h.push(name.clone());
        }
        h
    }

    fn record(&self, i: usize) -> Vec<String> {
        let r = &self.rows[i];
        let mut out = r.cells.clone();
        out.push(r.mae.map_or_else(String::new, |m| format!("{m:.6}")));
        if let Some((_, values)) = &self.extra {
            out.push(values.get(i).cloned().unwrap_or_default());
        }
        out
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.header())?;
        for i in 0..self.rows.len() {
            w.write_record(self.record(i))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Data(e.to_string()))
    }

    pub fn to_text(&self) -> String {
        let header = self.header();
        let rows: Vec<Vec<String>> = (0..self.rows.len()).map(|i| self.record(i)).collect();
        let widths: Vec<usize> = (0..header.len())
            .map(|c| {
                rows.iter()
                    .map(|r| r[c].chars().count())
                    .chain([header[c].chars().count()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let line = |cells: &[String]| {
            cells
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:<w$}"))
                .collect::<Vec<_>>()
                .join("  ")
                .trim_end()
                .to_string()
        };
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.title);
        let _ = writeln!(out, "{}", line(&header));
        let _ = writeln!(
            out,
            "{}",
            widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  ")
        );
        let best = self.best().map(|b| b.cells.clone());
        for (i, r) in rows.iter().enumerate() {
            let mark = if Some(&self.rows[i].cells) == best.as_ref() {
                "  <- best"
            } else {
                ""
            };
            let _ = writeln!(out, "{}{mark}", line(r));
        }
        for r in self.rows.iter().filter(|r| r.error.is_some()) {
            let _ = writeln!(
                out,
                "failed [{}]: {}",
                r.cells.join(", "),
                r.error.as_deref().unwrap_or("")
            );
        }
        for r in self.rows.iter().filter(|r| !r.per_target.is_empty()) {
            let detail: Vec<String> = r.per_target.iter().map(|(t, m)| format!("{t} {m:.6}")).collect();
            let _ = writeln!(out, "per target [{}]: {}", r.cells.join(", "), detail.join(", "));
        }
        let p = &self.provenance;
        let _ = writeln!(
            out,
            "seed {} | data {} | version {}",
            p.seed, p.data_fingerprint, p.version
        );
        let _ = writeln!(out, "protocol: {}", p.protocol);
        for n in &self.notes {
            let _ = writeln!(out, "note: {n}");
        }
        out
    }

    /// Writes `<stem>.csv`, `<stem>.txt` and `<stem>.json` under `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::file(dir, e.to_string()))?;
        let put = |ext: &str, body: String| {
            let path = dir.join(format!("{stem}.{ext}"));
            std::fs::write(&path, body).map_err(|e| Error::file(&path, e.to_string()))
        };
        put("csv", self.to_csv()?)?;
        put("txt", self.to_text())?;
        put("json", serde_json::to_string_pretty(self)? + "\n")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn report() -> ExperimentReport {
        ExperimentReport::new("t", &["a", "b"], Provenance::new(1, "abc", "p"))
    }

    #[test]
    fn tie_breaks() {
        let mut r = report();
        r.push(ReportRow::ok(vec!["2".into(), "x".into()], 0.5, 10)).unwrap();
        r.push(ReportRow::failed(vec!["0".into(), "x".into()], "bad shape"))
            .unwrap();
        r.push(ReportRow::ok(vec!["1".into(), "x".into()], 0.5, 10)).unwrap();
        r.push(ReportRow::ok(vec!["9".into(), "x".into()], 0.5, 3)).unwrap();
        r.sort();
        let order: Vec<&str> = r.rows.iter().map(|x| x.cells[0].as_str()).collect();
        assert_eq!(order, ["9", "1", "2", "0"]);
        assert_eq!(r.best().unwrap().cells[0], "9");
        let csv = r.to_csv().unwrap();
        assert!(csv.starts_with("a,b,MAE\n9,x,0.500000\n"), "{csv}");
        assert!(r.to_text().contains("failed [0, x]: bad shape"));
    }

    #[test]
    fn cell_count_checked() {
        assert!(report().push(ReportRow::ok(vec!["1".into()], 0.1, 1)).is_err());
    }

    proptest! {
        #[test]
        fn sorting_is_total(maes in prop::collection::vec((0u8..4, 0usize..3), 1..20)) {
            let mut r = report();
            for (i, (m, p)) in maes.iter().enumerate() {
                r.push(ReportRow::ok(vec![i.to_string(), "x".into()], *m as f64 / 4.0, *p)).unwrap();
            }
            let mut a = r.clone();
            a.sort();
            let mut b = r.clone();
            b.rows.reverse();
            b.sort();
            prop_assert_eq!(&a.rows, &b.rows);
            prop_assert_eq!(a.best(), a.rows.first());
        }
    }
}
