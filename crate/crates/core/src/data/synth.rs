//! Synthetic stand-ins for the air-quality, population-density and case
//! report feeds.
//!
//! Ground truth comes from an extended SEIR run: reported cases are a noisy
//! fraction of daily new infections and deaths follow cases with a lag. Each
//! temporal feature is `mean + scale · (ρ z + √(1 − ρ²) e)`, where `z` is the
//! standardized case series and `e` a smooth noise series orthogonalized
//! against `z`, so the sample correlation with cases is `ρ` up to clamping
//! and missing values. Density frames are a static urban background plus
//! hot-spots whose intensity follows the infectious compartment.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::density::{write_density_day, DensityFrame, FrameFormat, GridShape};
use super::temporal::{interpolate_missing, write_temporal, TemporalRecord, FEATURE_NAMES, HUMIDITY, N_FEATURES, PM10};
use super::truth::{write_truth, GroundTruth};
use crate::baselines::seir::{simulate_extended_seir, Checkpoint, ParamOverrides, SeirParams, SeirState};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MIN_DAYS: usize = 15;
pub const TEMPORAL_FILE: &str = "temporal.csv";
pub const TRUTH_FILE: &str = "truth.csv";
pub const DENSITY_DIR: &str = "density";

/// Typical level and spread of each feature, in `FEATURE_NAMES` order.
const FEATURE_LEVELS: [(f64, f64); N_FEATURES] = [
    (1013.0, 8.0),
    (120.0, 35.0),
    (12.0, 4.0),
    (4.0, 1.2),
    (70.0, 9.0),
    (20.0, 5.0),
    (12.0, 3.0),
    (0.3, 0.07),
    (15.0, 4.0),
    (35.0, 8.0),
    (60.0, 14.0),
    (45.0, 10.0),
    (3.0, 0.7),
];

fn default_correlations() -> BTreeMap<String, f64> {
    [
        ("pressure", 0.05),
        ("solar", 0.3),
        ("temp", 0.4),
        ("wind", -0.2),
        ("humidity", -0.25),
        ("pm10", 0.58),
        ("pm25", 0.5),
        ("co", 0.3),
        ("no", 0.35),
        ("no2", 0.4),
        ("nox", 0.4),
        ("o3", -0.3),
        ("so2", 0.1),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

fn default_checkpoints() -> Vec<Checkpoint> {
    let [lockdown, release] = crate::baselines::seir::default_checkpoint_dates();
    vec![
        Checkpoint {
            date: lockdown,
            overrides: ParamOverrides {
                beta: Some(0.12),
                ..Default::default()
            },
        },
        Checkpoint {
            date: release,
            overrides: ParamOverrides {
                beta: Some(0.17),
                ..Default::default()
            },
        },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub days: usize,
    pub start: NaiveDate,
    pub seir: SeirParams,
    pub initial_exposed: f64,
    pub initial_infectious: f64,
    pub checkpoints: Vec<Checkpoint>,
    pub dt: f64,
    /// Fraction of new infections that get reported.
    pub ascertainment: f64,
    /// Reported deaths per reported case, applied `death_lag` days later.
    pub death_ratio: f64,
    pub death_lag: usize,
    /// Log-scale standard deviation of multiplicative reporting noise.
    pub case_noise: f64,
    pub death_noise: f64,
    /// White-noise level mixed into the uncorrelated part of each feature.
    pub feature_noise: f64,
    /// Target correlation of each named feature with daily cases.
    pub correlations: BTreeMap<String, f64>,
    pub missing_rate: f64,
    pub grid: GridShape,
    pub hotspots: usize,
    /// Peak hot-spot intensity relative to the background peak.
    pub hotspot_gain: f64,
    pub density_noise: f64,
    pub snapshot_missing_rate: f64,
    pub frame_format: FrameFormat,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            days: 115,
            start: NaiveDate::from_ymd_opt(2020, 3, 2).expect("valid date"),
            seir: SeirParams::default(),
            initial_exposed: 2000.0,
            initial_infectious: 1000.0,
            checkpoints: default_checkpoints(),
            dt: 0.25,
            ascertainment: 0.1,
            death_ratio: 0.15,
            death_lag: 3,
            case_noise: 0.1,
            death_noise: 0.15,
            feature_noise: 0.5,
            correlations: default_correlations(),
            missing_rate: 0.02,
            grid: GridShape::CANONICAL,
            hotspots: 4,
            hotspot_gain: 2.0,
            density_noise: 0.05,
            snapshot_missing_rate: 0.0,
            frame_format: FrameFormat::Epif,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.days < MIN_DAYS {
            return Err(Error::config(format!(
                "period of {} days is shorter than {MIN_DAYS}",
                self.days
            )));
        }
        let noises = [
            ("case_noise", self.case_noise),
            ("death_noise", self.death_noise),
            ("feature_noise", self.feature_noise),
            ("density_noise", self.density_noise),
        ];
        for (name, v) in noises {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(format!("{name} must be finite and ≥ 0, got {v}")));
            }
        }
        let fractions = [
            ("ascertainment", self.ascertainment),
            ("missing_rate", self.missing_rate),
            ("snapshot_missing_rate", self.snapshot_missing_rate),
        ];
        for (name, v) in fractions {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if !(self.death_ratio.is_finite() && self.death_ratio >= 0.0) {
            return Err(Error::config("death_ratio must be ≥ 0"));
        }
        if !(self.hotspot_gain.is_finite() && self.hotspot_gain >= 0.0) {
            return Err(Error::config("hotspot_gain must be ≥ 0"));
        }
        if self.grid.is_empty() {
            return Err(Error::config("density grid must be non-empty"));
        }
        for (name, rho) in &self.correlations {
            if !FEATURE_NAMES.contains(&name.as_str()) {
                return Err(Error::config(format!("unknown feature '{name}' in correlations")));
            }
            if !(-1.0..=1.0).contains(rho) {
                return Err(Error::config(format!("correlation for '{name}' outside [-1, 1]")));
            }
        }
        self.seir.validate()
    }

    fn correlation(&self, feature: usize) -> f64 {
        self.correlations.get(FEATURE_NAMES[feature]).copied().unwrap_or(0.0)
    }
}

/// One day's three density snapshots (08:00, 16:00, 00:00); `None` = missing.
#[derive(Debug, Clone, PartialEq)]
pub struct DaySnapshots {
    pub date: NaiveDate,
    pub snapshots: [Option<Tensor>; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub temporal: Vec<TemporalRecord>,
    pub truth: Vec<GroundTruth>,
    pub density: Vec<DaySnapshots>,
    /// Latent infectious compartment driving the hot-spots.
    pub infectious: Vec<f64>,
}

impl SyntheticDataset {
    /// Writes `temporal.csv`, `truth.csv` and `density/` under `dir`.
    pub fn write(&self, dir: &Path, format: FrameFormat) -> Result<()> {
        let density = dir.join(DENSITY_DIR);
        std::fs::create_dir_all(&density).map_err(|e| Error::file(&density, e.to_string()))?;
        write_temporal(&dir.join(TEMPORAL_FILE), &self.temporal)?;
        write_truth(&dir.join(TRUTH_FILE), &self.truth)?;
        self.density
            .par_iter()
            .try_for_each(|d| write_density_day(&density, d.date, &d.snapshots, format))
    }

    /// The dataset [`Dataset::load`] would read back after [`Self::write`],
    /// without touching disk.
    pub fn to_dataset(&self) -> Result<Dataset> {
        let frames = self
            .density
            .iter()
            .map(|d| {
                let present: Vec<&Tensor> = d.snapshots.iter().flatten().collect();
                let first = present
                    .first()
                    .ok_or_else(|| Error::Data(format!("{}: no density snapshots", d.date)))?;
                let shape = GridShape {
                    rows: first.shape()[0],
                    cols: first.shape()[1],
                };
                let mut sum = vec![0.0; shape.len()];
                for s in &present {
                    sum.iter_mut().zip(s.data()).for_each(|(a, v)| *a += v);
                }
                sum.iter_mut().for_each(|v| *v /= present.len() as f64);
                DensityFrame::new(d.date, Tensor::new(vec![shape.rows, shape.cols], sum)?, shape)
            })
            .collect::<Result<_>>()?;
        let ds = Dataset {
            temporal: interpolate_missing(&self.temporal)?,
            truth: self.truth.clone(),
            frames,
        };
        ds.check_aligned()?;
        Ok(ds)
    }
}

fn gauss(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn standardize(values: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if var <= 1e-24 {
        return vec![0.0; values.len()];
    }
    let sd = var.sqrt();
    values.iter().map(|v| (v - mean) / sd).collect()
}

/// Smooth zero-mean noise, orthogonal to `z`, with unit population variance.
fn orthogonal_noise(z: &[f64], white: f64, rng: &mut impl Rng) -> Vec<f64> {
    let mut e = Vec::with_capacity(z.len());
    let mut ar = gauss(rng);
    for _ in z {
        ar = 0.8 * ar + 0.6 * gauss(rng);
        e.push(ar + white * gauss(rng));
    }
    let mean = e.iter().sum::<f64>() / e.len() as f64;
    e.iter_mut().for_each(|v| *v -= mean);
    let zz: f64 = z.iter().map(|v| v * v).sum();
    if zz > 0.0 {
        let proj = e.iter().zip(z).map(|(a, b)| a * b).sum::<f64>() / zz;
        e.iter_mut().zip(z).for_each(|(v, zi)| *v -= proj * zi);
    }
    standardize(&e)
}

struct Blob {
    row: f64,
    col: f64,
    width: f64,
    weight: f64,
}

impl Blob {
    fn random(shape: GridShape, width: f64, rng: &mut impl Rng) -> Self {
        Self {
            row: rng.gen_range(0.0..shape.rows as f64),
            col: rng.gen_range(0.0..shape.cols as f64),
            width,
            weight: rng.gen_range(0.5..1.5),
        }
    }

    fn paint(&self, grid: &mut [f64], shape: GridShape, amplitude: f64) {
        let inv = 1.0 / (2.0 * self.width * self.width);
        for r in 0..shape.rows {
            let dr = (r as f64 - self.row).powi(2);
            for c in 0..shape.cols {
                let d2 = dr + (c as f64 - self.col).powi(2);
                grid[r * shape.cols + c] += amplitude * self.weight * (-d2 * inv).exp();
            }
        }
    }
}

/// Deterministic synthetic dataset for `seed`.
pub fn synthesize_streams(config: &SynthConfig, seed: u64) -> Result<SyntheticDataset> {
    config.validate()?;
    let n = config.days;
    let initial = SeirState::seeded(
        config.seir.population,
        config.initial_exposed,
        config.initial_infectious,
    );
    let checkpoints: Vec<Checkpoint> = config
        .checkpoints
        .iter()
        .filter(|c| (c.date - config.start).num_days() < n as i64)
        .copied()
        .collect();
    let traj = simulate_extended_seir(&initial, &config.seir, &checkpoints, config.start, n, config.dt)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // day d reports the infections of day d → d + 1
    let reported: Vec<f64> = traj.daily_new_cases[1..=n]
        .iter()
        .map(|c| {
            let noise = config.case_noise * gauss(&mut rng) - config.case_noise.powi(2) / 2.0;
            (config.ascertainment * c * noise.exp()).round().max(0.0)
        })
        .collect();
    let deaths: Vec<f64> = (0..n)
        .map(|d| {
            // deaths draw on a week of cases centred `death_lag` days back
            let lo = d as i64 - config.death_lag as i64 - 3;
            let source = (lo..lo + 7)
                .map(|s| {
                    if s < 0 {
                        reported[0] * 0.5
                    } else {
                        reported[(s as usize).min(n - 1)]
                    }
                })
                .sum::<f64>()
                / 7.0;
            let noise = config.death_noise * gauss(&mut rng) - config.death_noise.powi(2) / 2.0;
            (config.death_ratio * source * noise.exp()).round().max(0.0)
        })
        .collect();
    let dates: Vec<NaiveDate> = (0..n).map(|d| config.start + chrono::Days::new(d as u64)).collect();
    let truth: Vec<GroundTruth> = (0..n)
        .map(|d| GroundTruth {
            date: dates[d],
            daily_cases: reported[d] as u64,
            daily_deaths: deaths[d] as u64,
        })
        .collect();

    let z = standardize(&reported);
    let mut columns = Vec::with_capacity(N_FEATURES);
    for (f, (mean, scale)) in FEATURE_LEVELS.iter().enumerate() {
        let rho = config.correlation(f);
        let e = orthogonal_noise(&z, config.feature_noise, &mut rng);
        let orth = (1.0 - rho * rho).max(0.0).sqrt();
        let col: Vec<f64> = z
            .iter()
            .zip(&e)
            .map(|(zi, ei)| {
                let v = mean + scale * (rho * zi + orth * ei);
                if f == HUMIDITY {
                    v.clamp(0.0, 100.0)
                } else if f >= PM10 || f == 1 {
                    v.max(0.0)
                } else {
                    v
                }
            })
            .collect();
        columns.push(col);
    }
    let mut temporal: Vec<TemporalRecord> = (0..n)
        .map(|d| {
            let mut features = [None; N_FEATURES];
            for (f, col) in columns.iter().enumerate() {
                features[f] = Some(col[d]);
            }
            TemporalRecord {
                date: dates[d],
                features,
            }
        })
        .collect();
    if config.missing_rate > 0.0 {
        for f in 0..N_FEATURES {
            for rec in temporal.iter_mut() {
                if rng.gen::<f64>() < config.missing_rate {
                    rec.features[f] = None;
                }
            }
            if temporal.iter().all(|r| r.features[f].is_none()) {
                temporal[0].features[f] = Some(columns[f][0]);
            }
        }
    }

    let infectious: Vec<f64> = traj.days[..n].iter().map(|s| s.i).collect();
    let density = synthesize_density(config, &dates, &infectious, &mut rng)?;
    Ok(SyntheticDataset {
        temporal,
        truth,
        density,
        infectious,
    })
}

fn synthesize_density(
    config: &SynthConfig,
    dates: &[NaiveDate],
    infectious: &[f64],
    rng: &mut ChaCha8Rng,
) -> Result<Vec<DaySnapshots>> {
    let shape = config.grid;
    let span = shape.rows.min(shape.cols) as f64;
    let mut background = vec![1.0; shape.len()];
    for _ in 0..6 {
        Blob::random(shape, (0.12 * span).max(1.0), rng).paint(&mut background, shape, 4.0);
    }
    let background_peak = background.iter().cloned().fold(0.0, f64::max);
    let mut hotspot_map = vec![0.0; shape.len()];
    for _ in 0..config.hotspots {
        Blob::random(shape, (0.04 * span).max(0.75), rng).paint(&mut hotspot_map, shape, 1.0);
    }
    let peak_i = infectious.iter().cloned().fold(0.0, f64::max);
    let lockdown = config.checkpoints.first().map(|c| c.date);
    let release = config.checkpoints.get(1).map(|c| c.date);
    let day_seed: u64 = rng.gen();

    dates
        .par_iter()
        .enumerate()
        .map(|(d, &date)| {
            let mut rng = ChaCha8Rng::seed_from_u64(day_seed);
            rng.set_stream(d as u64 + 1);
            let restricted = lockdown.is_some_and(|l| date >= l) && release.map_or(true, |r| date < r);
            let mobility = if restricted { 0.6 } else { 1.0 };
            let intensity = if peak_i > 0.0 { infectious[d] / peak_i } else { 0.0 };
            let hot = config.hotspot_gain * background_peak * intensity;
            let mut snapshots: [Option<Tensor>; 3] = [None, None, None];
            for (k, daytime) in [1.0, 1.1, 0.8].into_iter().enumerate() {
                let keep = rng.gen::<f64>() >= config.snapshot_missing_rate;
                let grid: Vec<f64> = background
                    .iter()
                    .zip(&hotspot_map)
                    .map(|(b, h)| {
                        let noise = 1.0 + config.density_noise * gauss(&mut rng);
                        ((b * mobility * daytime + hot * h) * noise).max(0.0)
                    })
                    .collect();
                if keep {
                    snapshots[k] = Some(Tensor::new(vec![shape.rows, shape.cols], grid)?);
                }
            }
            if snapshots.iter().all(Option::is_none) {
                // keep at least one snapshot so the day stays loadable
                let grid = background.iter().map(|b| b * mobility).collect();
                snapshots[0] = Some(Tensor::new(vec![shape.rows, shape.cols], grid)?);
            }
            Ok(DaySnapshots { date, snapshots })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::correlation::pearson;

    fn small() -> SynthConfig {
        SynthConfig {
            grid: GridShape { rows: 12, cols: 20 },
            ..SynthConfig::default()
        }
    }

    #[test]
    fn default_period_and_dates() {
        let ds = synthesize_streams(&small(), 1).unwrap();
        assert_eq!(ds.truth.len(), 115);
        assert_eq!(ds.temporal.len(), 115);
        assert_eq!(ds.density.len(), 115);
        assert_eq!(ds.truth[0].date.to_string(), "2020-03-02");
        assert_eq!(ds.truth[114].date.to_string(), "2020-06-24");
    }

    #[test]
    fn same_seed_same_dataset() {
        let a = synthesize_streams(&small(), 9).unwrap();
        let b = synthesize_streams(&small(), 9).unwrap();
        assert_eq!(a, b);
        let c = synthesize_streams(&small(), 10).unwrap();
        assert_ne!(a.temporal, c.temporal);
    }

    #[test]
    fn perfect_correlation_without_noise_is_affine() {
        let mut cfg = small();
        cfg.feature_noise = 0.0;
        cfg.missing_rate = 0.0;
        cfg.correlations.insert("no2".into(), 1.0);
        let ds = synthesize_streams(&cfg, 3).unwrap();
        let cases: Vec<f64> = ds.truth.iter().map(|g| g.daily_cases as f64).collect();
        let no2: Vec<f64> = ds.temporal.iter().map(|r| r.features[9].unwrap()).collect();
        // fit no2 = a + b·cases through two points and check every day
        let (i, j) = (0, cases.iter().enumerate().max_by(|x, y| x.1.total_cmp(y.1)).unwrap().0);
        let b = (no2[j] - no2[i]) / (cases[j] - cases[i]);
        let a = no2[i] - b * cases[i];
        for (c, v) in cases.iter().zip(&no2) {
            assert!((a + b * c - v).abs() < 1e-9);
        }
    }

    #[test]
    fn pm10_correlation_near_target() {
        let mut cfg = small();
        cfg.missing_rate = 0.0;
        for seed in 0..5 {
            let ds = synthesize_streams(&cfg, seed).unwrap();
            let cases: Vec<f64> = ds.truth.iter().map(|g| g.daily_cases as f64).collect();
            let pm10: Vec<f64> = ds.temporal.iter().map(|r| r.features[PM10].unwrap()).collect();
            let r = pearson(&pm10, &cases).unwrap();
            assert!((r - 0.58).abs() < 0.1, "seed {seed}: {r}");
        }
    }

    #[test]
    fn lagged_deaths_correlate_with_cases() {
        let ds = synthesize_streams(&small(), 4).unwrap();
        let cases: Vec<f64> = ds.truth.iter().map(|g| g.daily_cases as f64).collect();
        let deaths: Vec<f64> = ds.truth.iter().map(|g| g.daily_deaths as f64).collect();
        assert!(pearson(&cases, &deaths).unwrap() > 0.7);
    }

    #[test]
    fn hotspots_track_infections() {
        let mut cfg = small();
        cfg.density_noise = 0.0;
        let ds = synthesize_streams(&cfg, 2).unwrap();
        let totals: Vec<f64> = ds
            .density
            .iter()
            .map(|d| d.snapshots[2].as_ref().unwrap().data().iter().sum())
            .collect();
        // within the unrestricted opening weeks, mass rises with infections
        let before = (cfg.checkpoints[0].date - cfg.start).num_days() as usize;
        let r = pearson(&totals[..before], &ds.infectious[..before]).unwrap();
        assert!(r > 0.99, "{r}");
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = small();
        cfg.days = 14;
        assert!(synthesize_streams(&cfg, 0).is_err());
        let mut cfg = small();
        cfg.feature_noise = -0.1;
        assert!(synthesize_streams(&cfg, 0).is_err());
        let mut cfg = small();
        cfg.correlations.insert("pollen".into(), 0.3);
        assert!(synthesize_streams(&cfg, 0).is_err());
    }
}
