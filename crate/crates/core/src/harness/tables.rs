//! The experiments behind each results table: architecture grids scored by
//! cross-validation, target ablations, filter sweeps and the fusion summary.

use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::cv::{cross_validate_with, CV_PROTOCOL};
use super::experiments::TwinHorizon;
use super::grid::{grid_search_with, GridPoint, GridSpec, PointScore};
use super::pipeline::{Split, TrainConfig};
use super::report::{
    ExperimentReport, Provenance, ReportRow, ABLATION_COLUMNS, ARCHITECTURE_COLUMNS, ENKF_COLUMNS, FUSION_COLUMNS,
    IMPROVEMENT_COLUMN,
};
use super::synthetic::{planted_kernel_samples, PlantedKernelSpec};
use crate::assim::{EnkfConfig, InitMode};
use crate::data::{Dataset, Target, N_FEATURES};
use crate::error::{Error, Result};
use crate::forecast::{build_spatial_cnn, build_temporal_cnn, train_donor, Donor, FusedModel};
use crate::metrics::{mae, relative_improvement};
use crate::nn::{fit, LayerSpec, Network, Padding, TrainOptions};
use crate::tensor::Tensor;

pub const MAE_NOTE: &str = "MAE on the normalized scale, averaged over targets";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DonorKind {
    Temporal,
    Spatial,
}

impl DonorKind {
    pub fn label(self) -> &'static str {
        match self {
            DonorKind::Temporal => "CNN-T",
            DonorKind::Spatial => "CNN-S",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvConfig {
    pub folds: usize,
    /// Minimum prediction days per block.
    pub min_block: usize,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            folds: 10,
            min_block: 1,
        }
    }
}

fn protocol() -> String {
    format!("{CV_PROTOCOL}; {MAE_NOTE}")
}

/// The search region: every day before the validation range.
fn search_range(split: &Split) -> Range<usize> {
    0..split.ranges.validation.start
}

fn fold_seed(seed: u64, fold: usize) -> u64 {
    seed.wrapping_mul(0x2545_F491_4F6C_DD1D).wrapping_add(fold as u64 + 1)
}

/// Per-column MAE of a donor over `(input, target)` pairs.
fn column_maes(donor: &Donor, examples: &[(Tensor, Tensor)]) -> Result<Vec<f64>> {
    let preds: Vec<Tensor> = examples
        .par_iter()
        .map(|(x, _)| donor.network.predict(x))
        .collect::<Result<_>>()?;
    let width = donor.targets().len();
    (0..width)
        .map(|c| {
            let p: Vec<f64> = preds.iter().map(|t| t.data()[c]).collect();
            let y: Vec<f64> = examples.iter().map(|(_, t)| t.data()[c]).collect();
            mae(&p, &y)
        })
        .collect()
}

fn build_donor(kind: DonorKind, split: &Split, config: &TrainConfig, seed: u64) -> Result<Donor> {
    let (t, s) = config.resolved(split.grid());
    match kind {
        DonorKind::Temporal => {
            t.validate()?;
            build_temporal_cnn(&t, seed)
        }
        DonorKind::Spatial => {
            s.validate()?;
            build_spatial_cnn(&s, seed)
        }
    }
}

/// Cross-validated MAE of one donor architecture over the days before the
/// validation range. Each fold trains a fresh network on the past only.
pub fn donor_cv(split: &Split, kind: DonorKind, config: &TrainConfig, cv: &CvConfig, seed: u64) -> Result<PointScore> {
    if split.prepared.scalers.target_names != config.targets {
        return Err(Error::config("training targets differ from the prepared targets"));
    }
    let window = config.window();
    let p = &split.prepared;
    let days = p.prediction_days(search_range(split), window);
    let examples = |idx: Range<usize>| -> Result<Vec<(Tensor, Tensor)>> {
        let d = &days[idx];
        match kind {
            DonorKind::Temporal => p.temporal_examples(d, window),
            DonorKind::Spatial => Ok(p.spatial_examples(d)),
        }
    };
    let params = build_donor(kind, split, config, seed)?.network.parameter_count();
    let (result, per_fold) = cross_validate_with(0..days.len(), cv.folds, cv.min_block, |fold| {
        let fs = fold_seed(seed, fold.index);
        let mut donor = build_donor(kind, split, config, fs)?;
        let opts = TrainOptions {
            seed: fs,
            ..config.donor_train.clone()
        };
        train_donor(&mut donor, &examples(fold.train.clone())?, &opts)?;
        let cols = column_maes(&donor, &examples(fold.eval.clone())?)?;
        Ok((cols.iter().sum::<f64>() / cols.len() as f64, cols))
    })?;
    let mut score = PointScore::from_cv(result, params);
    score.per_target = config
        .targets
        .iter()
        .enumerate()
        .map(|(c, t)| {
            let m = per_fold.iter().map(|f| f[c]).sum::<f64>() / per_fold.len() as f64;
            (t.name().to_string(), m)
        })
        .collect();
    Ok(score)
}

/// Applies one grid point to a donor's architecture. Recognized axes:
/// `window`, `kernel` (square, both conv layers), `kernel1`, `kernel2`,
/// `filters1`, `filters2`, `epochs` and `learning_rate`.
pub fn apply_point(base: &TrainConfig, kind: DonorKind, point: &GridPoint) -> Result<TrainConfig> {
    let mut c = base.clone();
    for (name, _) in &point.0 {
        let square = |k: usize| (k, k);
        match (name.as_str(), kind) {
            ("window", DonorKind::Temporal) => c.temporal.window_size = point.usize(name)?,
            ("kernel", DonorKind::Temporal) => {
                let k = square(point.usize(name)?);
                (c.temporal.kernel1, c.temporal.kernel2) = (k, k);
            }
            ("kernel", DonorKind::Spatial) => {
                let k = square(point.usize(name)?);
                (c.spatial.kernel1, c.spatial.kernel2) = (k, k);
            }
            ("kernel1", DonorKind::Temporal) => c.temporal.kernel1 = square(point.usize(name)?),
            ("kernel2", DonorKind::Temporal) => c.temporal.kernel2 = square(point.usize(name)?),
            ("kernel1", DonorKind::Spatial) => c.spatial.kernel1 = square(point.usize(name)?),
            ("kernel2", DonorKind::Spatial) => c.spatial.kernel2 = square(point.usize(name)?),
            ("filters1", DonorKind::Temporal) => c.temporal.filters1 = point.usize(name)?,
            ("filters2", DonorKind::Temporal) => c.temporal.filters2 = point.usize(name)?,
            ("filters1", DonorKind::Spatial) => c.spatial.filters1 = point.usize(name)?,
            ("filters2", DonorKind::Spatial) => c.spatial.filters2 = point.usize(name)?,
            ("epochs", _) => c.donor_train.epochs = point.usize(name)?,
            ("learning_rate", _) => c.donor_train.learning_rate = point.f64(name)?,
            _ => {
                return Err(Error::config(format!(
                    "axis '{name}' does not apply to {}",
                    kind.label()
                )))
            }
        }
    }
    Ok(c)
}

fn kernel_cell(k: (usize, usize)) -> String {
    format!("{}x{}", k.0, k.1)
}

/// Report columns for a donor grid: kernel and filter columns, preceded by the
/// window size when the grid searches over it.
pub fn donor_grid_columns(grid: &GridSpec) -> Vec<&'static str> {
    let mut cols = Vec::new();
    if grid.axes.iter().any(|a| a.name == "window") {
        cols.push("Window Size");
    }
    cols.extend(ARCHITECTURE_COLUMNS);
    cols
}

fn donor_cells(base: &TrainConfig, kind: DonorKind, point: &GridPoint, with_window: bool) -> Vec<String> {
    let c = apply_point(base, kind, point).unwrap_or_else(|_| base.clone());
    let (k1, k2, f1, f2) = match kind {
        DonorKind::Temporal => (
            c.temporal.kernel1,
            c.temporal.kernel2,
            c.temporal.filters1,
            c.temporal.filters2,
        ),
        DonorKind::Spatial => (
            c.spatial.kernel1,
            c.spatial.kernel2,
            c.spatial.filters1,
            c.spatial.filters2,
        ),
    };
    let mut cells = Vec::new();
    if with_window {
        cells.push(c.temporal.window_size.to_string());
    }
    cells.extend([kernel_cell(k1), kernel_cell(k2), f1.to_string(), f2.to_string()]);
    cells
}

/// The temporal architecture grid: K ∈ {3,5,7}, L1 ∈ {8,16,96}, L2 ∈ {32,96,128}.
pub fn temporal_architecture_grid() -> GridSpec {
    GridSpec::new(vec![
        ("kernel", vec![json!(3), json!(5), json!(7)]),
        ("filters1", vec![json!(8), json!(16), json!(96)]),
        ("filters2", vec![json!(32), json!(96), json!(128)]),
    ])
}

/// Cross-validated grid search over one donor's architecture.
pub fn donor_grid_search(
    ds: &Dataset,
    kind: DonorKind,
    grid: &GridSpec,
    base: &TrainConfig,
    cv: &CvConfig,
    seed: u64,
) -> Result<ExperimentReport> {
    let split = Split::new(ds, &base.targets, base.window())?;
    let with_window = grid.axes.iter().any(|a| a.name == "window");
    let columns = donor_grid_columns(grid);
    let title = format!("{} hyperparameter search", kind.label());
    let mut report = grid_search_with(
        &title,
        &columns,
        grid,
        Provenance::new(seed, ds.fingerprint(), protocol()),
        |p| donor_cells(base, kind, p, with_window),
        |p| donor_cv(&split, kind, &apply_point(base, kind, p)?, cv, seed),
    )?;
    report.notes.push(format!(
        "{} folds over days 0..{}; days {}..{} held out",
        cv.folds, split.ranges.validation.start, split.ranges.validation.start, split.ranges.validation.end
    ));
    Ok(report)
}

/// Options for the receptive-field recovery search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelRecoveryConfig {
    pub data: PlantedKernelSpec,
    pub kernels: Vec<usize>,
    pub cv: CvConfig,
    pub train: TrainOptions,
}

impl Default for KernelRecoveryConfig {
    fn default() -> Self {
        Self {
            data: PlantedKernelSpec {
                samples: 200,
                noise: 0.3,
                ..PlantedKernelSpec::default()
            },
            kernels: vec![3, 5, 7],
            cv: CvConfig { folds: 4, min_block: 1 },
            train: TrainOptions {
                epochs: 60,
                learning_rate: 0.02,
                batch_size: 8,
                ..TrainOptions::default()
            },
        }
    }
}

/// The central `k × k` patch of a `window × features × 1` tensor.
fn centre_crop(x: &Tensor, k: usize) -> Result<Tensor> {
    let (h, w) = (x.shape()[0], x.shape()[1]);
    if k > h || k > w {
        return Err(Error::shape("centre_crop", format!("{k}×{k} patch from {h}×{w}")));
    }
    let (r0, c0) = ((h - k) / 2, (w - k) / 2);
    let data = (0..k)
        .flat_map(|a| (0..k).map(move |b| (a, b)))
        .map(|(a, b)| x.data()[(r0 + a) * w + c0 + b])
        .collect();
    Tensor::new(vec![k, k, 1], data)
}

/// Grid search over the kernel width of a single valid convolution read out
/// at the window centre, on data generated by a planted filter.
pub fn kernel_recovery_search(config: &KernelRecoveryConfig, seed: u64) -> Result<ExperimentReport> {
    let samples = planted_kernel_samples(&config.data, seed)?;
    let grid = GridSpec::new(vec![("kernel", config.kernels.iter().map(|&k| json!(k)).collect())]);
    grid_search_with(
        "Receptive-field recovery",
        &["Kernel Size"],
        &grid,
        Provenance::new(seed, format!("planted-kernel-{}", config.data.kernel), protocol()),
        GridPoint::cells,
        |p| {
            let k = p.usize("kernel")?;
            if k == 0 || k > config.data.window || k > N_FEATURES {
                return Err(Error::config(format!("kernel {k} does not fit the window")));
            }
            let data: Vec<(Tensor, Tensor)> = samples
                .iter()
                .map(|(x, y)| Ok((centre_crop(x, k)?, y.clone())))
                .collect::<Result<_>>()?;
            let specs = [
                LayerSpec::Conv2d {
                    kernel: (k, k),
                    filters: 1,
                    padding: Padding::Valid,
                },
                LayerSpec::Flatten,
            ];
            let (cv, _) = cross_validate_with(0..data.len(), config.cv.folds, config.cv.min_block, |fold| {
                let fs = fold_seed(seed, fold.index);
                let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(fs);
                let mut net = Network::build(&[k, k, 1], &specs, &mut rng)?;
                let opts = TrainOptions {
                    seed: fs,
                    ..config.train.clone()
                };
                fit(&mut net, &data[fold.train.clone()], &opts)?;
                let eval = &data[fold.eval.clone()];
                let pred: Vec<f64> = eval
                    .iter()
                    .map(|(x, _)| Ok(net.predict(x)?.data()[0]))
                    .collect::<Result<_>>()?;
                let truth: Vec<f64> = eval.iter().map(|(_, y)| y.data()[0]).collect();
                Ok((mae(&pred, &truth)?, ()))
            })?;
            Ok(PointScore::from_cv(cv, k * k + 1))
        },
    )
}

/// `CNN-T_{cases}`-style label.
pub fn ablation_label(kind: DonorKind, targets: &[Target]) -> String {
    let names: Vec<&str> = targets.iter().map(|t| t.name()).collect();
    format!("{}_{{{}}}", kind.label(), names.join(","))
}

pub const ABLATION_TARGETS: [&[Target]; 3] = [&[Target::Cases], &[Target::Deaths], &[Target::Cases, Target::Deaths]];

/// Trains CNN-T and CNN-S on cases, deaths and both, scoring each by
/// cross-validation. Rows keep the model × target-set order.
pub fn ablation_targets(ds: &Dataset, base: &TrainConfig, cv: &CvConfig, seed: u64) -> Result<ExperimentReport> {
    if ds.truth.is_empty() {
        return Err(Error::precondition("ablation_targets", "dataset has no ground truth"));
    }
    let runs: Vec<(DonorKind, &[Target])> = [DonorKind::Temporal, DonorKind::Spatial]
        .into_iter()
        .flat_map(|k| ABLATION_TARGETS.into_iter().map(move |t| (k, t)))
        .collect();
    let rows: Vec<ReportRow> = runs
        .par_iter()
        .map(|&(kind, targets)| {
            let label = ablation_label(kind, targets);
            let score = (|| {
                let config = TrainConfig {
                    targets: targets.to_vec(),
                    ..base.clone()
                };
                let split = Split::new(ds, targets, config.window())?;
                donor_cv(&split, kind, &config, cv, seed)
            })();
            match score {
                Ok(s) => ReportRow {
                    cells: vec![label],
                    mae: Some(s.mae),
                    std: s.std,
                    fold_maes: s.fold_maes,
                    per_target: s.per_target,
                    parameter_count: s.parameter_count,
                    error: None,
                },
                Err(e) => ReportRow::failed(vec![label], e.to_string()),
            }
        })
        .collect();
    let mut report = ExperimentReport::new(
        "Single- vs dual-target donors",
        &ABLATION_COLUMNS,
        Provenance::new(seed, ds.fingerprint(), protocol()),
    );
    for r in rows {
        report.push(r)?;
    }
    Ok(report)
}

/// init ∈ {zero, one, previous_state} × R ∈ {0.01, 0.1} × m ∈ {50, 100}.
pub fn enkf_grid() -> GridSpec {
    GridSpec::new(vec![
        ("init_mode", InitMode::ALL.iter().map(|m| json!(m)).collect()),
        ("r_scale", vec![json!(0.01), json!(0.1)]),
        ("ensemble_size", vec![json!(50), json!(100)]),
    ])
}

fn enkf_point(base: &EnkfConfig, p: &GridPoint) -> Result<EnkfConfig> {
    let mut c = base.clone();
    for (name, value) in &p.0 {
        match name.as_str() {
            "init_mode" => {
                c.init_mode = serde_json::from_value(value.clone())
                    .map_err(|_| Error::config(format!("unknown init mode {value}")))?
            }
            "r_scale" => c.r_scale = p.f64(name)?,
            "ensemble_size" => c.ensemble_size = p.usize(name)?,
            "perturbation_variance" => c.perturbation_variance = p.f64(name)?,
            _ => return Err(Error::config(format!("axis '{name}' is not a filter setting"))),
        }
    }
    Ok(c)
}

/// Runs the filter over `horizon` for every grid point; the MAE is that of
/// the one-step forecasts. Nonpositive observation variances are rejected
/// before anything runs. Ties prefer the smaller ensemble.
pub fn enkf_sweep(
    horizon: &TwinHorizon,
    model: &FusedModel,
    grid: &GridSpec,
    base: &EnkfConfig,
    seed: u64,
    data_fingerprint: &str,
) -> Result<ExperimentReport> {
    grid.validate()?;
    for axis in grid.axes.iter().filter(|a| a.name == "r_scale") {
        for v in &axis.values {
            if !v.as_f64().is_some_and(|r| r > 0.0 && r.is_finite()) {
                return Err(Error::config(format!(
                    "R scale {v} is not positive; R must be positive definite"
                )));
            }
        }
    }
    let cells = |p: &GridPoint| match enkf_point(base, p) {
        Ok(c) => vec![
            c.init_mode.label().to_string(),
            c.r_scale.to_string(),
            c.ensemble_size.to_string(),
        ],
        Err(_) => p.cells(),
    };
    if grid.axes.len() > ENKF_COLUMNS.len() {
        return Err(Error::config("filter sweep supports at most three axes"));
    }
    let mut report = grid_search_with(
        "Filter parameter search",
        &ENKF_COLUMNS,
        grid,
        Provenance::new(
            seed,
            data_fingerprint,
            format!("one filter run over {} days; {MAE_NOTE}", horizon.truth.len() - 1),
        ),
        cells,
        |p| {
            let config = enkf_point(base, p)?;
            config.validate()?;
            let (_, all, _) = horizon.filter(model, &config, seed)?;
            Ok(PointScore::single(all, config.ensemble_size))
        },
    )?;
    report.notes.push("ties are broken by the smaller ensemble".into());
    Ok(report)
}

/// Donor and fused MAEs with the fused model's relative improvement over each.
pub fn fusion_summary(temporal: f64, spatial: f64, fused: f64, provenance: Provenance) -> Result<ExperimentReport> {
    let gain_t = relative_improvement(temporal, fused)?;
    let gain_s = relative_improvement(spatial, fused)?;
    let mut report = ExperimentReport::new("Fusion summary", &FUSION_COLUMNS, provenance);
    for (label, m) in [("CNN-T", temporal), ("CNN-S", spatial), ("Fused-CNN", fused)] {
        report.push(ReportRow::ok(vec![label.to_string()], m, 0))?;
    }
    report.extra = Some((
        IMPROVEMENT_COLUMN.to_string(),
        vec![
            format!("{gain_t:.1} %"),
            format!("{gain_s:.1} %"),
            format!("Avg. {:.1} %", (gain_t + gain_s) / 2.0),
        ],
    ));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn improvements_from_reference_maes() {
        let r = fusion_summary(0.107, 0.122, 0.0766, Provenance::new(0, "-", "-")).unwrap();
        assert_eq!(r.extra.as_ref().unwrap().1, ["28.4 %", "37.2 %", "Avg. 32.8 %"]);
        assert_eq!(r.header(), ["Model", "MAE", IMPROVEMENT_COLUMN]);
    }

    #[test]
    fn labels() {
        assert_eq!(ablation_label(DonorKind::Temporal, &[Target::Cases]), "CNN-T_{cases}");
        assert_eq!(
            ablation_label(DonorKind::Spatial, &[Target::Cases, Target::Deaths]),
            "CNN-S_{cases,deaths}"
        );
    }

    #[test]
    fn table_grids() {
        assert_eq!(temporal_architecture_grid().len(), 27);
        assert_eq!(enkf_grid().len(), 12);
        assert_eq!(donor_grid_columns(&temporal_architecture_grid()), ARCHITECTURE_COLUMNS);
        let p = &temporal_architecture_grid().points()[0];
        let c = apply_point(&TrainConfig::default(), DonorKind::Temporal, p).unwrap();
        assert_eq!(
            (c.temporal.kernel1, c.temporal.filters1, c.temporal.filters2),
            ((3, 3), 8, 32)
        );
        assert_eq!(
            donor_cells(&TrainConfig::default(), DonorKind::Temporal, p, false),
            ["3x3", "3x3", "8", "32"]
        );
    }

    #[test]
    fn unknown_axis() {
        let g = GridSpec::new(vec![("window", vec![json!(5)])]);
        let e = apply_point(&TrainConfig::default(), DonorKind::Spatial, &g.points()[0]).unwrap_err();
        assert!(e.to_string().contains("CNN-S"));
    }

    #[test]
    fn crop() {
        let x = Tensor::new(vec![3, 5, 1], (0..15).map(f64::from).collect()).unwrap();
        assert_eq!(centre_crop(&x, 1).unwrap().data(), [7.0]);
        assert_eq!(
            centre_crop(&x, 3).unwrap().data(),
            [1.0, 2.0, 3.0, 6.0, 7.0, 8.0, 11.0, 12.0, 13.0]
        );
    }
}
