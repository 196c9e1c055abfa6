//! Daily meteorological and air-quality series.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::NaiveDate;

use crate::error::{Error, Result};

pub const N_FEATURES: usize = 13;

/// CSV column names, in feature order.
pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "pressure", "solar", "temp", "wind", "humidity", "pm10", "pm25", "co", "no", "no2", "nox", "o3", "so2",
];

pub const HUMIDITY: usize = 4;
pub const PM10: usize = 5;
/// First concentration column; concentrations run to the end of the row.
const FIRST_CONCENTRATION: usize = PM10;

#[derive(Debug, Clone, PartialEq)]
pub struct TemporalRecord {
    pub date: NaiveDate,
    pub features: [Option<f64>; N_FEATURES],
}

impl TemporalRecord {
    /// All features, failing if any is still missing.
    pub fn complete(&self) -> Result<[f64; N_FEATURES]> {
        let mut out = [0.0; N_FEATURES];
        for (i, v) in self.features.iter().enumerate() {
            out[i] =
                v.ok_or_else(|| Error::Data(format!("{}: feature '{}' is missing", self.date, FEATURE_NAMES[i])))?;
        }
        Ok(out)
    }

    fn check(&self) -> std::result::Result<(), String> {
        for (i, v) in self.features.iter().enumerate() {
            let Some(v) = *v else { continue };
            if !v.is_finite() {
                return Err(format!("{} is not finite", FEATURE_NAMES[i]));
            }
            if i == HUMIDITY && !(0.0..=100.0).contains(&v) {
                return Err(format!("humidity {v} outside [0, 100]"));
            }
            if i >= FIRST_CONCENTRATION && v < 0.0 {
                return Err(format!("negative concentration {} = {v}", FEATURE_NAMES[i]));
            }
        }
        Ok(())
    }
}

pub fn header() -> String {
    let mut h = String::from("date");
    for name in FEATURE_NAMES {
        h.push(',');
        h.push_str(name);
    }
    h
}

pub fn parse_date(text: &str) -> std::result::Result<NaiveDate, String> {
    NaiveDate::parse_from_str(text.trim(), "%Y-%m-%d").map_err(|e| format!("bad date '{text}': {e}"))
}

/// Parses the temporal CSV; an empty cell marks a missing value.
pub fn load_temporal(path: &Path) -> Result<Vec<TemporalRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::file(path, e.to_string()))?;
    let headers = reader.headers()?.clone();
    let expected = header();
    if headers.iter().collect::<Vec<_>>().join(",") != expected {
        return Err(Error::Parse {
            path: path.into(),
            row: 1,
            msg: format!("header must be `{expected}`"),
        });
    }
    let mut out: Vec<TemporalRecord> = Vec::new();
    for (idx, row) in reader.records().enumerate() {
        // header is row 1
        let row_no = idx + 2;
        let parse_err = |msg: String| Error::Parse {
            path: path.into(),
            row: row_no,
            msg,
        };
        let row = row.map_err(|e| parse_err(e.to_string()))?;
        if row.len() != N_FEATURES + 1 {
            return Err(parse_err(format!(
                "expected {} columns, got {}",
                N_FEATURES + 1,
                row.len()
            )));
        }
        let date = parse_date(&row[0]).map_err(parse_err)?;
        let mut features = [None; N_FEATURES];
        for (i, cell) in row.iter().skip(1).enumerate() {
            let cell = cell.trim();
            if !cell.is_empty() {
                let v: f64 = cell
                    .parse()
                    .map_err(|_| parse_err(format!("column '{}': bad number '{cell}'", FEATURE_NAMES[i])))?;
                features[i] = Some(v);
            }
        }
        let record = TemporalRecord { date, features };
        record.check().map_err(parse_err)?;
        if let Some(prev) = out.last() {
            if record.date == prev.date {
                return Err(parse_err(format!("duplicate date {date}")));
            }
            if record.date < prev.date {
                return Err(parse_err(format!("date {date} is earlier than {}", prev.date)));
            }
        }
        out.push(record);
    }
    Ok(out)
}

pub fn write_temporal(path: &Path, records: &[TemporalRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::file(path, e.to_string()))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{}", header())?;
    for r in records {
        write!(w, "{}", r.date.format("%Y-%m-%d"))?;
        for v in &r.features {
            match v {
                Some(x) => write!(w, ",{x:?}")?,
                None => write!(w, ",")?,
            }
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Nearest-neighbour gap filling along the date axis.
///
/// A missing value takes the value of the temporally nearest present date in
/// the same column; equidistant candidates resolve to the earlier date.
pub fn interpolate_missing(series: &[TemporalRecord]) -> Result<Vec<TemporalRecord>> {
    let mut out = series.to_vec();
    for col in 0..N_FEATURES {
        let present: Vec<(i64, f64)> = series
            .iter()
            .filter_map(|r| r.features[col].map(|v| (day_number(r.date), v)))
            .collect();
        if present.is_empty() {
            if series.is_empty() {
                continue;
            }
            return Err(Error::Data(format!(
                "feature '{}' has no present values",
                FEATURE_NAMES[col]
            )));
        }
        for rec in out.iter_mut().filter(|r| r.features[col].is_none()) {
            let t = day_number(rec.date);
            // first present index at or after t
            let after = present.partition_point(|&(d, _)| d < t);
            let candidate = match (after.checked_sub(1), present.get(after)) {
                (Some(b), Some(&(da, va))) => {
                    let (db, vb) = present[b];
                    if t - db <= da - t {
                        vb
                    } else {
                        va
                    }
                }
                (Some(b), None) => present[b].1,
                (None, Some(&(_, va))) => va,
                (None, None) => unreachable!("present is nonempty"),
            };
            rec.features[col] = Some(candidate);
        }
    }
    Ok(out)
}

fn day_number(date: NaiveDate) -> i64 {
    i64::from(chrono::Datelike::num_days_from_ce(&date))
}
