//! Experiments built from the forecasting, filtering and baseline pieces.

use serde::{Deserialize, Serialize};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::assim::{free_run, run_filter, EnkfConfig, FilterRun, FusedForward};
use crate::baselines::{simulate_extended_seir, Checkpoint, ParamOverrides, SeirParams, SeirState};
use crate::data::{synthesize_streams, GridShape, SynthConfig, Target};
use crate::error::{Error, Result};
use crate::forecast::{
    build_spatial_cnn, build_temporal_cnn, evaluate_donor, evaluate_fused, fit_fused, train_donor, FusedModel,
    FusedSample, FusedTrainOptions, FusionConfig, SpatialCnnConfig, TemporalCnnConfig,
};
use crate::metrics::mae;
use crate::nn::TrainOptions;
use crate::tensor::Tensor;

use super::pipeline::{train_all, Split, TrainConfig};
use super::synthetic::{multiplicative_samples, MultiplicativeSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionAdvantageConfig {
    pub data: MultiplicativeSpec,
    /// Leading share of samples used for training.
    pub train_fraction: f64,
    pub temporal: TemporalCnnConfig,
    pub spatial: SpatialCnnConfig,
    pub fusion: FusionConfig,
    pub donor_train: TrainOptions,
    pub fused_train: FusedTrainOptions,
}

impl Default for FusionAdvantageConfig {
    fn default() -> Self {
        let data = MultiplicativeSpec::default();
        Self {
            temporal: TemporalCnnConfig {
                window_size: data.window,
                kernel1: (3, 3),
                kernel2: (3, 3),
                filters1: 4,
                filters2: 8,
                fc_sizes: [16, 16, 64],
                targets: vec![Target::Cases],
                ..TemporalCnnConfig::default()
            },
            spatial: SpatialCnnConfig {
                grid: data.grid,
                kernel1: (3, 3),
                kernel2: (3, 3),
                filters1: 4,
                filters2: 8,
                fc_sizes: [16, 16, 16, 64],
                targets: vec![Target::Cases],
                ..SpatialCnnConfig::default()
            },
            fusion: FusionConfig {
                length: 16,
                k_out: 8,
                ..FusionConfig::default()
            },
            donor_train: TrainOptions {
                epochs: 40,
                learning_rate: 0.01,
                ..TrainOptions::default()
            },
            fused_train: FusedTrainOptions {
                train: TrainOptions {
                    epochs: 300,
                    learning_rate: 0.03,
                    ..TrainOptions::default()
                },
                fine_tune: false,
            },
            train_fraction: 0.75,
            data,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionAdvantage {
    pub temporal_mae: f64,
    pub spatial_mae: f64,
    pub fused_mae: f64,
}

impl FusionAdvantage {
    pub fn fused_wins(&self) -> bool {
        self.fused_mae < self.temporal_mae.min(self.spatial_mae)
    }
}

/// Trains both donors and the fused head on a multiplicative-signal dataset
/// and scores all three on the held-out tail.
pub fn fusion_advantage(config: &FusionAdvantageConfig, seed: u64) -> Result<FusionAdvantage> {
    let samples = multiplicative_samples(&config.data, seed)?;
    let cut = ((samples.len() as f64 * config.train_fraction) as usize).clamp(1, samples.len() - 1);
    let (train, test) = samples.split_at(cut);
    let pairs = |s: &[FusedSample], temporal: bool| -> Vec<_> {
        s.iter()
            .map(|x| {
                let input = if temporal { x.window.clone() } else { x.frame.clone() };
                (input, Tensor::vector(x.target.clone()))
            })
            .collect()
    };
    let opts = |offset: u64, base: &TrainOptions| TrainOptions {
        seed: seed.wrapping_mul(31).wrapping_add(offset),
        ..base.clone()
    };
    let mut t = build_temporal_cnn(&config.temporal, seed.wrapping_add(1))?;
    let mut s = build_spatial_cnn(&config.spatial, seed.wrapping_add(2))?;
    train_donor(&mut t, &pairs(train, true), &opts(1, &config.donor_train))?;
    train_donor(&mut s, &pairs(train, false), &opts(2, &config.donor_train))?;
    let temporal_mae = evaluate_donor(&t, &pairs(test, true))?;
    let spatial_mae = evaluate_donor(&s, &pairs(test, false))?;
    let mut fused = FusedModel::new(t, s, &config.fusion, seed.wrapping_add(3))?;
    let fused_opts = FusedTrainOptions {
        train: opts(3, &config.fused_train.train),
        fine_tune: config.fused_train.fine_tune,
    };
    fit_fused(&mut fused, train, &fused_opts)?;
    Ok(FusionAdvantage {
        temporal_mae,
        spatial_mae,
        fused_mae: evaluate_fused(&fused, test)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TwinConfig {
    pub synth: SynthConfig,
    pub train: TrainConfig,
    pub enkf: EnkfConfig,
    /// Standard deviation of observation noise on the normalized scale.
    pub observation_noise: f64,
    /// Relative error of the baseline's transmission rate.
    pub seir_error: f64,
}

impl Default for TwinConfig {
    fn default() -> Self {
        Self {
            synth: SynthConfig {
                grid: GridShape { rows: 12, cols: 16 },
                case_noise: 0.02,
                death_noise: 0.02,
                ..SynthConfig::default()
            },
            train: TrainConfig::small(),
            enkf: EnkfConfig {
                r_scale: 0.01,
                ..EnkfConfig::default()
            },
            observation_noise: 0.1,
            seir_error: 0.2,
        }
    }
}

/// Held-out MAEs of one twin experiment, on the normalized scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwinOutcome {
    /// One-step filter forecasts over all targets.
    pub enkf_mae: f64,
    pub free_run_mae: f64,
    /// Cases only, for the comparison with the SEIR baseline.
    pub enkf_cases_mae: f64,
    pub seir_cases_mae: f64,
    /// Multiplier applied to the baseline's β.
    pub seir_beta_factor: f64,
}

/// Everything the filter needs over a held-out horizon.
pub struct TwinHorizon {
    /// Day before the first scored day.
    pub origin: usize,
    pub truth: Vec<Vec<f64>>,
    pub observations: Vec<Vec<f64>>,
    pub inputs: Vec<(Tensor, Tensor)>,
}

impl TwinHorizon {
    /// Days `origin ..= last` with noisy observations of the normalized targets.
    pub fn new(split: &Split, origin: usize, noise: f64, seed: u64) -> Result<Self> {
        let p = &split.prepared;
        if origin + 1 < split.window || origin + 1 >= p.len() {
            return Err(Error::precondition(
                "twin",
                format!("origin day {origin} leaves no horizon"),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let days = origin..p.len();
        let truth: Vec<Vec<f64>> = days.clone().map(|d| p.targets[d].clone()).collect();
        let observations = truth
            .iter()
            .map(|x| {
                x.iter()
                    .map(|v| v + noise * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect();
        let inputs = days
            .map(|d| Ok((p.window(d, split.window)?, p.frames[d].clone())))
            .collect::<Result<_>>()?;
        Ok(Self {
            origin,
            truth,
            observations,
            inputs,
        })
    }

    /// `(forecast MAE, cases-only forecast MAE)` of the filter over days after the origin.
    pub fn filter(&self, model: &FusedModel, config: &EnkfConfig, seed: u64) -> Result<(FilterRun, f64, f64)> {
        let fwd = FusedForward::new(model, &self.inputs)?;
        let previous = self.observations[0].clone();
        let run = run_filter(config, &fwd, &self.observations, Some(&previous), seed)?;
        let forecasts: Vec<Vec<f64>> = run.days[1..].iter().map(|d| d.forecast.clone()).collect();
        let all = mae_rows(&forecasts, &self.truth[1..], None)?;
        let cases = mae_rows(&forecasts, &self.truth[1..], Some(0))?;
        Ok((run, all, cases))
    }

    /// MAE of the model iterated from the origin observation.
    pub fn free_run(&self, model: &FusedModel) -> Result<f64> {
        let fwd = FusedForward::new(model, &self.inputs[..self.inputs.len() - 1])?;
        let path = free_run(&fwd, &self.observations[0], self.truth.len() - 1)?;
        mae_rows(&path, &self.truth[1..], None)
    }
}

fn mae_rows(pred: &[Vec<f64>], truth: &[Vec<f64>], column: Option<usize>) -> Result<f64> {
    let pick = |rows: &[Vec<f64>]| -> Vec<f64> {
        match column {
            Some(c) => rows.iter().map(|r| r[c]).collect(),
            None => rows.iter().flatten().copied().collect(),
        }
    };
    mae(&pick(pred), &pick(truth))
}

/// Scales the transmission rate β, and every checkpoint override of it, by
/// `1 ± error` with the sign drawn from `seed`. Scaling β alone always moves
/// R0; perturbing β and γ together can leave it unchanged.
pub fn misparameterize(config: &SynthConfig, error: f64, seed: u64) -> (SeirParams, Vec<Checkpoint>, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let factor = if rng.gen_bool(0.5) { 1.0 + error } else { 1.0 - error };
    let params = SeirParams {
        beta: config.seir.beta * factor,
        ..config.seir
    };
    let checkpoints = config
        .checkpoints
        .iter()
        .filter(|c| (c.date - config.start).num_days() < config.days as i64)
        .map(|c| Checkpoint {
            date: c.date,
            overrides: ParamOverrides {
                beta: c.overrides.beta.map(|b| b * factor),
                ..c.overrides
            },
        })
        .collect();
    (params, checkpoints, factor)
}

/// Reported daily cases of an extended SEIR run shaped like the synthetic truth.
pub fn seir_reported_cases(config: &SynthConfig, params: &SeirParams, checkpoints: &[Checkpoint]) -> Result<Vec<f64>> {
    let initial = SeirState::seeded(
        config.seir.population,
        config.initial_exposed,
        config.initial_infectious,
    );
    let traj = simulate_extended_seir(&initial, params, checkpoints, config.start, config.days, config.dt)?;
    Ok(traj.daily_new_cases[1..=config.days]
        .iter()
        .map(|c| config.ascertainment * c)
        .collect())
}

/// Synthesizes a dataset, trains all models on its training range, then
/// scores filter forecasts, the free-running fused model and a
/// misparameterized SEIR on the remaining days.
pub fn twin_experiment(config: &TwinConfig, seed: u64) -> Result<TwinOutcome> {
    let ds = synthesize_streams(&config.synth, seed)?.to_dataset()?;
    let (split, model, _) = train_all(&ds, &config.train, seed)?;
    if split.prepared.scalers.target_names.first() != Some(&Target::Cases) {
        return Err(Error::config("twin experiment needs cases as the first target"));
    }
    let origin = split.ranges.test.start - 1;
    let horizon = TwinHorizon::new(&split, origin, config.observation_noise, seed.wrapping_add(11))?;
    let (_, enkf_mae, enkf_cases_mae) = horizon.filter(&model, &config.enkf, seed.wrapping_add(12))?;
    let free_run_mae = horizon.free_run(&model)?;

    let (params, checkpoints, seir_beta_factor) =
        misparameterize(&config.synth, config.seir_error, seed.wrapping_add(13));
    let cases = seir_reported_cases(&config.synth, &params, &checkpoints)?;
    let scaler = &split.prepared.scalers.targets;
    let seir: Vec<f64> = cases[origin + 1..]
        .iter()
        .map(|c| (c - scaler.mean[0]) / scaler.std[0])
        .collect();
    let truth: Vec<f64> = horizon.truth[1..].iter().map(|r| r[0]).collect();
    Ok(TwinOutcome {
        enkf_mae,
        free_run_mae,
        enkf_cases_mae,
        seir_cases_mae: mae(&seir, &truth)?,
        seir_beta_factor,
    })
}
