//! Daily lab-confirmed cases and deaths.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::temporal::parse_date;
use crate::error::{Error, Result};

pub const HEADER: &str = "date,daily_cases,daily_deaths";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroundTruth {
    pub date: NaiveDate,
    pub daily_cases: u64,
    pub daily_deaths: u64,
}

/// Which epidemiological states a model predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Cases,
    Deaths,
}

impl Target {
    pub const ALL: [Target; 2] = [Target::Cases, Target::Deaths];

    pub fn name(self) -> &'static str {
        match self {
            Target::Cases => "cases",
            Target::Deaths => "deaths",
        }
    }

    pub fn value(self, g: &GroundTruth) -> f64 {
        match self {
            Target::Cases => g.daily_cases as f64,
            Target::Deaths => g.daily_deaths as f64,
        }
    }
}

pub fn load_truth(path: &Path) -> Result<Vec<GroundTruth>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::file(path, e.to_string()))?;
    if reader.headers()?.iter().collect::<Vec<_>>().join(",") != HEADER {
        return Err(Error::Parse {
            path: path.into(),
            row: 1,
            msg: format!("header must be `{HEADER}`"),
        });
    }
    let mut out: Vec<GroundTruth> = Vec::new();
    for (idx, row) in reader.records().enumerate() {
        let row_no = idx + 2;
        let parse_err = |msg: String| Error::Parse {
            path: path.into(),
            row: row_no,
            msg,
        };
        let row = row.map_err(|e| parse_err(e.to_string()))?;
        let date = parse_date(&row[0]).map_err(parse_err)?;
        let count = |i: usize| -> Result<u64> {
            row[i]
                .trim()
                .parse()
                .map_err(|_| parse_err(format!("bad count '{}'", &row[i])))
        };
        let g = GroundTruth {
            date,
            daily_cases: count(1)?,
            daily_deaths: count(2)?,
        };
        if let Some(prev) = out.last() {
            if g.date <= prev.date {
                return Err(parse_err(format!("date {date} does not follow {}", prev.date)));
            }
        }
        out.push(g);
    }
    Ok(out)
}

pub fn write_truth(path: &Path, rows: &[GroundTruth]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::file(path, e.to_string()))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{HEADER}")?;
    for g in rows {
        writeln!(w, "{},{},{}", g.date.format("%Y-%m-%d"), g.daily_cases, g.daily_deaths)?;
    }
    w.flush()?;
    Ok(())
}
