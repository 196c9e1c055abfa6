//! Daily population-density frames.
//!
//! A dataset directory holds, per day, up to three snapshots (08:00, 16:00,
//! 00:00) either as headerless CSV grids named `YYYY-MM-DD_HHMM.csv` or as one
//! `YYYY-MM-DD.epif` container whose tensors are named by snapshot time. The
//! daily frame is the mean of the snapshots present.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::temporal::parse_date;
use crate::container::Container;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const SNAPSHOT_TIMES: [&str; 3] = ["0800", "1600", "0000"];
pub const CONTAINER_KIND: &str = "density-day";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridShape {
    pub rows: usize,
    pub cols: usize,
}

impl GridShape {
    /// The rasterized Greater London grid.
    pub const CANONICAL: GridShape = GridShape { rows: 172, cols: 287 };

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Default for GridShape {
    fn default() -> Self {
        Self::CANONICAL
    }
}

impl std::fmt::Display for GridShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}×{}", self.rows, self.cols)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityFrame {
    pub date: NaiveDate,
    pub grid: Tensor,
}

impl DensityFrame {
    pub fn new(date: NaiveDate, grid: Tensor, shape: GridShape) -> Result<Self> {
        if grid.shape() != [shape.rows, shape.cols] {
            return Err(Error::shape(
                "density_frame",
                format!("grid {:?}, expected {shape}", grid.shape()),
            ));
        }
        if grid.data().iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::Data(format!("{date}: density values must be finite and ≥ 0")));
        }
        Ok(Self { date, grid })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameFormat {
    Csv,
    #[default]
    Epif,
}

fn read_csv_grid(path: &Path, shape: GridShape) -> Result<Tensor> {
    let text = fs::read_to_string(path).map_err(|e| Error::file(path, e.to_string()))?;
    let mut data = Vec::with_capacity(shape.len());
    let mut rows = 0;
    for (r, line) in text.lines().filter(|l| !l.trim().is_empty()).enumerate() {
        let before = data.len();
        for cell in line.split(',') {
            let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                path: path.into(),
                row: r + 1,
                msg: format!("bad number '{cell}'"),
            })?;
            data.push(v);
        }
        if data.len() - before != shape.cols {
            return Err(Error::file(
                path,
                format!(
                    "row {} has {} columns, expected grid {shape}",
                    r + 1,
                    data.len() - before
                ),
            ));
        }
        rows += 1;
    }
    if rows != shape.rows {
        return Err(Error::file(
            path,
            format!("grid {rows}×{}, expected {shape}", shape.cols),
        ));
    }
    Tensor::new(vec![shape.rows, shape.cols], data)
}

fn check_grid(path: &Path, t: &Tensor, shape: GridShape) -> Result<()> {
    if t.shape() != [shape.rows, shape.cols] {
        let got: Vec<String> = t.shape().iter().map(|d| d.to_string()).collect();
        return Err(Error::file(path, format!("grid {}, expected {shape}", got.join("×"))));
    }
    Ok(())
}

enum DaySource {
    Csv(Vec<PathBuf>),
    Epif(PathBuf),
}

fn average(date: NaiveDate, snapshots: Vec<Tensor>, shape: GridShape, origin: &Path) -> Result<DensityFrame> {
    if snapshots.is_empty() {
        return Err(Error::file(origin, format!("{date}: all three snapshots are missing")));
    }
    let k = snapshots.len() as f64;
    let mut sum = vec![0.0; shape.len()];
    for s in &snapshots {
        for (a, v) in sum.iter_mut().zip(s.data()) {
            *a += v;
        }
    }
    sum.iter_mut().for_each(|v| *v /= k);
    DensityFrame::new(date, Tensor::new(vec![shape.rows, shape.cols], sum)?, shape)
        .map_err(|e| Error::file(origin, e.to_string()))
}

/// Loads every day found in `dir`, sorted by date.
pub fn load_density_frames(dir: &Path, shape: GridShape) -> Result<Vec<DensityFrame>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::file(dir, e.to_string()))?;
    let mut days: BTreeMap<NaiveDate, DaySource> = BTreeMap::new();
    for entry in entries {
        let path = entry?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        if let Some(stem) = name.strip_suffix(".epif") {
            let date = parse_date(stem).map_err(|m| Error::file(&path, m))?;
            if days.insert(date, DaySource::Epif(path.clone())).is_some() {
                return Err(Error::file(&path, format!("{date} has both CSV and EPIF snapshots")));
            }
        } else if let Some(stem) = name.strip_suffix(".csv") {
            let Some((day, time)) = stem.split_once('_') else {
                return Err(Error::file(&path, "expected YYYY-MM-DD_HHMM.csv"));
            };
            if !SNAPSHOT_TIMES.contains(&time) {
                return Err(Error::file(&path, format!("unknown snapshot time '{time}'")));
            }
            let date = parse_date(day).map_err(|m| Error::file(&path, m))?;
            match days.entry(date).or_insert_with(|| DaySource::Csv(Vec::new())) {
                DaySource::Csv(files) => files.push(path.clone()),
                DaySource::Epif(_) => {
                    return Err(Error::file(&path, format!("{date} has both CSV and EPIF snapshots")))
                }
            }
        }
    }
    let days: Vec<(NaiveDate, DaySource)> = days.into_iter().collect();
    days.into_par_iter()
        .map(|(date, source)| match source {
            DaySource::Csv(mut files) => {
                // snapshot order, so the average matches EPIF frames bit for bit
                files.sort_by_key(|f| {
                    let name = f.file_name().and_then(|n| n.to_str()).unwrap_or("");
                    SNAPSHOT_TIMES.iter().position(|t| name.ends_with(&format!("_{t}.csv")))
                });
                let grids = files
                    .iter()
                    .map(|f| read_csv_grid(f, shape))
                    .collect::<Result<Vec<_>>>()?;
                average(date, grids, shape, &files[0])
            }
            DaySource::Epif(path) => {
                let c = Container::read(&path)?;
                if c.kind != CONTAINER_KIND {
                    return Err(Error::file(&path, format!("container kind '{}'", c.kind)));
                }
                let mut grids = Vec::new();
                for (name, t) in c.tensors {
                    if !SNAPSHOT_TIMES.contains(&name.as_str()) {
                        return Err(Error::file(&path, format!("unknown snapshot '{name}'")));
                    }
                    check_grid(&path, &t, shape)?;
                    grids.push(t);
                }
                average(date, grids, shape, &path)
            }
        })
        .collect()
}

/// Writes one day's snapshots; `None` entries are omitted from the output.
pub fn write_density_day(
    dir: &Path,
    date: NaiveDate,
    snapshots: &[Option<Tensor>; 3],
    format: FrameFormat,
) -> Result<()> {
    let day = date.format("%Y-%m-%d").to_string();
    match format {
        FrameFormat::Epif => {
            let mut c = Container::new(CONTAINER_KIND, serde_json::json!({ "date": day }));
            for (time, snap) in SNAPSHOT_TIMES.iter().zip(snapshots) {
                if let Some(t) = snap {
                    c.push(*time, t.clone());
                }
            }
            c.write(&dir.join(format!("{day}.epif")))
        }
        FrameFormat::Csv => {
            for (time, snap) in SNAPSHOT_TIMES.iter().zip(snapshots) {
                let Some(t) = snap else { continue };
                let path = dir.join(format!("{day}_{time}.csv"));
                let file = fs::File::create(&path).map_err(|e| Error::file(&path, e.to_string()))?;
                let mut w = BufWriter::new(file);
                let cols = t.shape()[1];
                for row in t.data().chunks(cols) {
                    let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
                    writeln!(w, "{}", line.join(","))?;
                }
                w.flush()?;
            }
            Ok(())
        }
    }
}
