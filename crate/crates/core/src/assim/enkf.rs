//! Stochastic ensemble Kalman filter with an identity observation operator.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Added to `Y_f Y_fᵀ` before inversion.
pub const GAIN_RIDGE: f64 = 1e-8;

/// `m` state vectors of equal dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleState {
    members: Vec<Vec<f64>>,
}

impl EnsembleState {
    pub fn new(members: Vec<Vec<f64>>) -> Result<Self> {
        if members.len() < 2 {
            return Err(Error::precondition(
                "ensemble",
                format!("ensemble size {} < 2", members.len()),
            ));
        }
        let s = members[0].len();
        if s == 0 || members.iter().any(|m| m.len() != s) {
            return Err(Error::shape("ensemble", "members must share a nonzero dimension"));
        }
        if members.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::FilterDivergence("non-finite ensemble member".into()));
        }
        Ok(Self { members })
    }

    pub fn members(&self) -> &[Vec<f64>] {
        &self.members
    }

    pub fn into_members(self) -> Vec<Vec<f64>> {
        self.members
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn dim(&self) -> usize {
        self.members[0].len()
    }

    pub fn mean(&self) -> Vec<f64> {
        column_mean(&self.members)
    }

    /// Per-coordinate sample standard deviation (divisor `m − 1`).
    pub fn spread(&self) -> Vec<f64> {
        let mean = self.mean();
        let m = self.size() as f64;
        (0..self.dim())
            .map(|j| {
                let ss: f64 = self.members.iter().map(|x| (x[j] - mean[j]).powi(2)).sum();
                (ss / (m - 1.0)).sqrt()
            })
            .collect()
    }

    /// Sample covariance `(1/(m−1)) Σ (x − x̄)(x − x̄)ᵀ`.
    pub fn covariance(&self) -> DMatrix<f64> {
        let mean = self.mean();
        let s = self.dim();
        let mut p = DMatrix::zeros(s, s);
        for x in &self.members {
            for a in 0..s {
                for b in 0..s {
                    p[(a, b)] += (x[a] - mean[a]) * (x[b] - mean[b]);
                }
            }
        }
        p / (self.size() as f64 - 1.0)
    }
}

fn column_mean(rows: &[Vec<f64>]) -> Vec<f64> {
    let s = rows[0].len();
    let mut mean = vec![0.0; s];
    for r in rows {
        mean.iter_mut().zip(r).for_each(|(a, v)| *a += v);
    }
    mean.iter_mut().for_each(|a| *a /= rows.len() as f64);
    mean
}

/// Observation covariance `R` and the spread used to initialize members.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    r: DMatrix<f64>,
    chol_l: DMatrix<f64>,
    pub perturbation_variance: f64,
}

impl NoiseSpec {
    pub fn new(r: DMatrix<f64>, perturbation_variance: f64) -> Result<Self> {
        if !r.is_square() || r.nrows() == 0 {
            return Err(Error::config(format!(
                "R must be square, got {}×{}",
                r.nrows(),
                r.ncols()
            )));
        }
        if (&r - r.transpose()).abs().max() > 1e-12 * r.abs().max().max(1.0) {
            return Err(Error::config("R must be symmetric"));
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("R must be finite"));
        }
        let chol = nalgebra::Cholesky::new(r.clone()).ok_or_else(|| Error::config("R must be positive definite"))?;
        if !(perturbation_variance.is_finite() && perturbation_variance >= 0.0) {
            return Err(Error::config("perturbation variance must be finite and ≥ 0"));
        }
        Ok(Self {
            chol_l: chol.l(),
            r,
            perturbation_variance,
        })
    }

    /// `R = r · I` over `dim` states.
    pub fn scalar(r: f64, dim: usize, perturbation_variance: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::config(format!("R scale must be positive, got {r}")));
        }
        Self::new(DMatrix::identity(dim, dim) * r, perturbation_variance)
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn dim(&self) -> usize {
        self.r.nrows()
    }
}

/// `m` independent draws `u_i ~ N(0, R)`.
pub fn sample_perturbations(noise: &NoiseSpec, m: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let s = noise.dim();
    (0..m)
        .map(|_| {
            let z = DVector::from_fn(s, |_, _| rng.sample::<f64, _>(StandardNormal));
            (&noise.chol_l * z).iter().copied().collect()
        })
        .collect()
}

/// `y_i = y + u_i` for `m` members.
pub fn perturb_observations(y: &[f64], noise: &NoiseSpec, m: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if y.len() != noise.dim() {
        return Err(Error::shape(
            "perturb_observations",
            format!("observation of length {} vs R of size {}", y.len(), noise.dim()),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(sample_perturbations(noise, m, &mut rng)
        .into_iter()
        .map(|u| y.iter().zip(u).map(|(a, b)| a + b).collect())
        .collect())
}

/// `(X_f, Y_f)`, both `s × m`, for forecast members `x_i` and perturbations `u_i`.
pub fn normalized_anomalies(ensemble: &[Vec<f64>], perturbations: &[Vec<f64>]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let m = ensemble.len();
    if m < 2 {
        return Err(Error::precondition(
            "normalized_anomalies",
            format!("ensemble size {m} < 2"),
        ));
    }
    if perturbations.len() != m {
        return Err(Error::shape(
            "normalized_anomalies",
            format!("{} perturbations for {m} members", perturbations.len()),
        ));
    }
    let s = ensemble[0].len();
    if ensemble.iter().chain(perturbations).any(|v| v.len() != s) {
        return Err(Error::shape("normalized_anomalies", "inconsistent state dimension"));
    }
    let xm = column_mean(ensemble);
    let um = column_mean(perturbations);
    let norm = ((m - 1) as f64).sqrt();
    let x = DMatrix::from_fn(s, m, |j, i| (ensemble[i][j] - xm[j]) / norm);
    let y = DMatrix::from_fn(s, m, |j, i| {
        (ensemble[i][j] - perturbations[i][j] - xm[j] + um[j]) / norm
    });
    Ok((x, y))
}

/// `K = X_f Y_fᵀ (Y_f Y_fᵀ + εI)⁻¹`.
pub fn kalman_gain(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x.shape() != y.shape() {
        return Err(Error::shape(
            "kalman_gain",
            format!("X_f {:?} vs Y_f {:?}", x.shape(), y.shape()),
        ));
    }
    let s = y.nrows();
    let yy = y * y.transpose() + DMatrix::identity(s, s) * GAIN_RIDGE;
    let inv = yy
        .try_inverse()
        .ok_or_else(|| Error::FilterDivergence("Y_f Y_fᵀ is singular".into()))?;
    let k = x * y.transpose() * inv;
    if k.iter().any(|v| !v.is_finite()) {
        return Err(Error::FilterDivergence("non-finite Kalman gain".into()));
    }
    Ok(k)
}

/// `x_i^a = x_i^f + K (y_i − x_i^f)` for every member.
pub fn analysis_update(ensemble: &[Vec<f64>], gain: &DMatrix<f64>, observations: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    if ensemble.len() != observations.len() {
        return Err(Error::shape(
            "analysis_update",
            format!("{} members vs {} observations", ensemble.len(), observations.len()),
        ));
    }
    let s = gain.nrows();
    if gain.ncols() != s {
        return Err(Error::shape("analysis_update", "gain must be square"));
    }
    ensemble
        .iter()
        .zip(observations)
        .map(|(x, y)| {
            if x.len() != s || y.len() != s {
                return Err(Error::shape(
                    "analysis_update",
                    format!("member {} / observation {} vs gain {s}", x.len(), y.len()),
                ));
            }
            let innovation: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
            Ok((0..s)
                .map(|r| x[r] + (0..s).map(|c| gain[(r, c)] * innovation[c]).sum::<f64>())
                .collect())
        })
        .collect()
}

/// One-day propagation of a single state; exogenous inputs for the day are
/// the model's own business.
pub trait ForwardModel: Sync {
    fn state_dim(&self) -> usize;

    /// Advances `state` from day `day` to day `day + 1`.
    fn step(&self, day: usize, state: &[f64]) -> Result<Vec<f64>>;
}

/// Advances each member independently.
pub fn forecast_step(ensemble: &[Vec<f64>], day: usize, model: &dyn ForwardModel) -> Result<Vec<Vec<f64>>> {
    ensemble.par_iter().map(|x| model.step(day, x)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Selection {
    #[default]
    Mean,
    Median,
}

/// Coordinatewise mean or median of the members.
pub fn select_estimate(members: &[Vec<f64>], mode: Selection) -> Result<Vec<f64>> {
    let first = members
        .first()
        .ok_or_else(|| Error::precondition("select_estimate", "empty ensemble"))?;
    match mode {
        Selection::Mean => Ok(column_mean(members)),
        Selection::Median => Ok((0..first.len())
            .map(|j| {
                let mut col: Vec<f64> = members.iter().map(|x| x[j]).collect();
                col.sort_by(f64::total_cmp);
                let n = col.len();
                if n % 2 == 1 {
                    col[n / 2]
                } else {
                    (col[n / 2 - 1] + col[n / 2]) / 2.0
                }
            })
            .collect()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    #[default]
    Zero,
    One,
    PreviousState,
}

impl InitMode {
    pub const ALL: [InitMode; 3] = [InitMode::Zero, InitMode::One, InitMode::PreviousState];

    pub fn label(self) -> &'static str {
        match self {
            InitMode::Zero => "Zero",
            InitMode::One => "One",
            InitMode::PreviousState => "Previous State",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnkfConfig {
    pub ensemble_size: usize,
    pub init_mode: InitMode,
    pub r_scale: f64,
    pub selection: Selection,
    pub perturbation_variance: f64,
}

impl Default for EnkfConfig {
    fn default() -> Self {
        Self {
            ensemble_size: 50,
            init_mode: InitMode::Zero,
            r_scale: 0.1,
            selection: Selection::Mean,
            perturbation_variance: 1.0,
        }
    }
}

impl EnkfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ensemble_size < 2 {
            return Err(Error::config(format!(
                "ensemble size {} < 2; anomalies need at least two members",
                self.ensemble_size
            )));
        }
        if !(self.r_scale > 0.0 && self.r_scale.is_finite()) {
            return Err(Error::config(format!("R scale must be positive, got {}", self.r_scale)));
        }
        if !(self.perturbation_variance >= 0.0 && self.perturbation_variance.is_finite()) {
            return Err(Error::config("perturbation variance must be finite and ≥ 0"));
        }
        Ok(())
    }
}

/// Filter output for one observed day.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterDay {
    pub day: usize,
    pub observed: Vec<f64>,
    /// Selected estimate of the analysis ensemble.
    pub analysis: Vec<f64>,
    /// Selected estimate of the forecast ensemble valid for this day.
    pub forecast: Vec<f64>,
    /// Sample standard deviation of the forecast ensemble.
    pub spread: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterRun {
    pub days: Vec<FilterDay>,
    /// Forecast for the day after the last observation.
    pub next_forecast: Vec<f64>,
    /// Gain used on each day.
    pub gains: Vec<DMatrix<f64>>,
    pub final_analysis: EnsembleState,
}

impl FilterRun {
    pub fn forecasts(&self) -> Vec<Vec<f64>> {
        self.days.iter().map(|d| d.forecast.clone()).collect()
    }

    pub fn analyses(&self) -> Vec<Vec<f64>> {
        self.days.iter().map(|d| d.analysis.clone()).collect()
    }
}

/// Initial forecast ensemble: base state plus `N(0, variance · I)` spread.
pub fn initial_ensemble(
    mode: InitMode,
    dim: usize,
    m: usize,
    variance: f64,
    previous: Option<&[f64]>,
    rng: &mut impl Rng,
) -> Result<Vec<Vec<f64>>> {
    let base = match mode {
        InitMode::Zero => vec![0.0; dim],
        InitMode::One => vec![1.0; dim],
        InitMode::PreviousState => {
            let p = previous.ok_or_else(|| Error::config("previous_state initialization needs a previous state"))?;
            if p.len() != dim {
                return Err(Error::shape("initial_ensemble", "previous state dimension"));
            }
            p.to_vec()
        }
    };
    let sd = variance.sqrt();
    Ok((0..m)
        .map(|_| {
            base.iter()
                .map(|b| b + sd * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect())
}

/// Runs the filter over `observations[0..K]`: on each day perturb the
/// observation, compute anomalies and one pooled gain, update every member,
/// then forecast the next day through `model`.
pub fn run_filter(
    config: &EnkfConfig,
    model: &dyn ForwardModel,
    observations: &[Vec<f64>],
    previous: Option<&[f64]>,
    seed: u64,
) -> Result<FilterRun> {
    config.validate()?;
    let s = model.state_dim();
    let noise = NoiseSpec::scalar(config.r_scale, s, config.perturbation_variance)?;
    run_filter_with(config, &noise, model, observations, previous, seed)
}

/// [`run_filter`] with an explicit observation covariance.
pub fn run_filter_with(
    config: &EnkfConfig,
    noise: &NoiseSpec,
    model: &dyn ForwardModel,
    observations: &[Vec<f64>],
    previous: Option<&[f64]>,
    seed: u64,
) -> Result<FilterRun> {
    config.validate()?;
    let s = model.state_dim();
    if noise.dim() != s {
        return Err(Error::shape(
            "run_filter",
            format!("R of size {} for {s} states", noise.dim()),
        ));
    }
    if observations.is_empty() {
        return Err(Error::precondition("run_filter", "no observations"));
    }
    let m = config.ensemble_size;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ensemble = initial_ensemble(config.init_mode, s, m, noise.perturbation_variance, previous, &mut rng)?;
    let mut days = Vec::with_capacity(observations.len());
    let mut gains = Vec::with_capacity(observations.len());
    let mut analysis = ensemble.clone();
    for (k, y) in observations.iter().enumerate() {
        let wrap = |e: Error| Error::FilterStep {
            day: k,
            source: Box::new(e),
        };
        if y.len() != s {
            return Err(wrap(Error::shape(
                "run_filter",
                format!("observation of length {}", y.len()),
            )));
        }
        let forecast_estimate = select_estimate(&ensemble, config.selection).map_err(wrap)?;
        let spread = EnsembleState::new(ensemble.clone()).map_err(wrap)?.spread();
        let u = sample_perturbations(noise, m, &mut rng);
        let perturbed: Vec<Vec<f64>> = u
            .iter()
            .map(|ui| y.iter().zip(ui).map(|(a, b)| a + b).collect())
            .collect();
        let (xf, yf) = normalized_anomalies(&ensemble, &u).map_err(wrap)?;
        let gain = kalman_gain(&xf, &yf).map_err(wrap)?;
        analysis = analysis_update(&ensemble, &gain, &perturbed).map_err(wrap)?;
        days.push(FilterDay {
            day: k,
            observed: y.clone(),
            analysis: select_estimate(&analysis, config.selection).map_err(wrap)?,
            forecast: forecast_estimate,
            spread,
        });
        gains.push(gain);
        ensemble = forecast_step(&analysis, k, model).map_err(wrap)?;
        if ensemble.iter().flatten().any(|v| !v.is_finite()) {
            return Err(wrap(Error::FilterDivergence(
                "forecast produced non-finite members".into(),
            )));
        }
    }
    Ok(FilterRun {
        days,
        next_forecast: select_estimate(&ensemble, config.selection)?,
        gains,
        final_analysis: EnsembleState::new(analysis)?,
    })
}

/// Iterates `model` from `initial` without observations: entry `k` is the
/// state for day `k + 1`.
pub fn free_run(model: &dyn ForwardModel, initial: &[f64], steps: usize) -> Result<Vec<Vec<f64>>> {
    let mut x = initial.to_vec();
    let mut out = Vec::with_capacity(steps);
    for k in 0..steps {
        x = model.step(k, &x)?;
        out.push(x.clone());
    }
    Ok(out)
}

/// `x_{k+1} = A x_k + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub a: DMatrix<f64>,
    pub c: DVector<f64>,
}

impl ForwardModel for LinearModel {
    fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    fn step(&self, _day: usize, state: &[f64]) -> Result<Vec<f64>> {
        if state.len() != self.a.ncols() {
            return Err(Error::shape("linear_model", "state dimension"));
        }
        let x = DVector::from_column_slice(state);
        Ok((&self.a * x + &self.c).iter().copied().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_members(m: usize, s: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..m)
            .map(|_| (0..s).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect()
    }

    #[test]
    fn tiny_r_leaves_observations() {
        let noise = NoiseSpec::scalar(1e-12, 2, 1.0).unwrap();
        for y in perturb_observations(&[1.0, -3.0], &noise, 20, 1).unwrap() {
            assert!((y[0] - 1.0).abs() < 1e-5 && (y[1] + 3.0).abs() < 1e-5);
        }
    }

    #[test]
    fn perturbation_variance_matches_r() {
        let noise = NoiseSpec::scalar(0.1, 1, 1.0).unwrap();
        let ys = perturb_observations(&[0.0], &noise, 10_000, 3).unwrap();
        let mean = ys.iter().map(|y| y[0]).sum::<f64>() / 1e4;
        let var = ys.iter().map(|y| (y[0] - mean).powi(2)).sum::<f64>() / 9999.0;
        assert!((var - 0.1).abs() < 0.005, "{var}");
        assert_eq!(ys, perturb_observations(&[0.0], &noise, 10_000, 3).unwrap());
    }

    #[test]
    fn non_pd_r_rejected() {
        assert!(NoiseSpec::scalar(0.0, 2, 1.0).is_err());
        let r = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(NoiseSpec::new(r, 1.0).is_err());
    }

    #[test]
    fn identical_members_have_zero_anomalies() {
        let e = vec![vec![1.0, 2.0]; 5];
        let (x, y) = normalized_anomalies(&e, &vec![vec![0.0, 0.0]; 5]).unwrap();
        assert!(x.iter().all(|&v| v == 0.0) && y.iter().all(|&v| v == 0.0));
        let k = kalman_gain(&x, &y).unwrap();
        assert!(k.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn anomalies_reproduce_sample_covariance() {
        let e = random_members(30, 3, 4);
        let (x, y) = normalized_anomalies(&e, &vec![vec![0.0; 3]; 30]).unwrap();
        let p = EnsembleState::new(e).unwrap().covariance();
        assert!((&x * x.transpose() - &p).abs().max() < 1e-10);
        assert!((&y * y.transpose() - &p).abs().max() < 1e-10);
        for r in 0..3 {
            assert!(x.row(r).sum().abs() < 1e-12);
        }
    }

    #[test]
    fn gain_tends_to_identity_for_exact_observations() {
        let e = random_members(200, 2, 5);
        let noise = NoiseSpec::scalar(1e-10, 2, 1.0).unwrap();
        let u = sample_perturbations(&noise, 200, &mut ChaCha8Rng::seed_from_u64(6));
        let (x, y) = normalized_anomalies(&e, &u).unwrap();
        let k = kalman_gain(&x, &y).unwrap();
        assert!((k - DMatrix::<f64>::identity(2, 2)).abs().max() < 1e-4);
    }

    #[test]
    fn update_cases() {
        let e = random_members(4, 2, 7);
        let obs = random_members(4, 2, 8);
        let same = analysis_update(&e, &DMatrix::zeros(2, 2), &obs).unwrap();
        assert_eq!(same, e);
        let moved = analysis_update(&e, &DMatrix::identity(2, 2), &obs).unwrap();
        assert_eq!(moved, obs);
        let k = DMatrix::from_row_slice(2, 2, &[0.3, -0.1, 0.2, 0.5]);
        let out = analysis_update(&e, &k, &obs).unwrap();
        for i in 0..4 {
            let d0 = obs[i][0] - e[i][0];
            let d1 = obs[i][1] - e[i][1];
            assert!((out[i][0] - (e[i][0] + 0.3 * d0 - 0.1 * d1)).abs() < 1e-12);
            assert!((out[i][1] - (e[i][1] + 0.2 * d0 + 0.5 * d1)).abs() < 1e-12);
        }
    }

    #[test]
    fn selection_modes() {
        let m = vec![vec![1.0], vec![2.0], vec![9.0]];
        assert_eq!(select_estimate(&m, Selection::Mean).unwrap(), vec![4.0]);
        assert_eq!(select_estimate(&m, Selection::Median).unwrap(), vec![2.0]);
        let outlier = vec![vec![1.0], vec![2.0], vec![1e9]];
        assert_eq!(select_estimate(&outlier, Selection::Median).unwrap(), vec![2.0]);
        assert!(select_estimate(&[], Selection::Mean).is_err());
    }

    struct Shift;
    impl ForwardModel for Shift {
        fn state_dim(&self) -> usize {
            1
        }
        fn step(&self, _: usize, x: &[f64]) -> Result<Vec<f64>> {
            Ok(vec![x[0] * 2.0 + 1.0])
        }
    }

    #[test]
    fn forecast_keeps_member_order() {
        let out = forecast_step(&[vec![1.0], vec![5.0], vec![1.0]], 0, &Shift).unwrap();
        assert_eq!(out, vec![vec![3.0], vec![11.0], vec![3.0]]);
    }

    #[test]
    fn ensemble_size_bounds() {
        let cfg = EnkfConfig {
            ensemble_size: 1,
            ..EnkfConfig::default()
        };
        assert!(run_filter(&cfg, &Shift, &[vec![0.0]], None, 0).is_err());
        let cfg = EnkfConfig {
            ensemble_size: 2,
            ..EnkfConfig::default()
        };
        assert!(run_filter(&cfg, &Shift, &[vec![0.0], vec![1.0]], None, 0).is_ok());
        let cfg = EnkfConfig {
            r_scale: 0.0,
            ..EnkfConfig::default()
        };
        assert!(run_filter(&cfg, &Shift, &[vec![0.0]], None, 0).is_err());
    }

    #[test]
    fn seeded_runs_repeat() {
        let obs: Vec<Vec<f64>> = (0..10).map(|k| vec![k as f64]).collect();
        let a = run_filter(&EnkfConfig::default(), &Shift, &obs, None, 4).unwrap();
        let b = run_filter(&EnkfConfig::default(), &Shift, &obs, None, 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn divergence_names_the_day() {
        let obs: Vec<Vec<f64>> = (0..2000).map(|_| vec![0.0]).collect();
        let cfg = EnkfConfig {
            ensemble_size: 3,
            r_scale: 1e300,
            ..EnkfConfig::default()
        };
        let err = run_filter(&cfg, &Shift, &obs, None, 0).unwrap_err();
        assert!(matches!(err, Error::FilterStep { .. }), "{err}");
    }
}
