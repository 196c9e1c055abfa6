use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::Donor;
use super::fusion::{FusionConfig, FusionHead, HeadShapes};
use super::prepare::{DatedInput, DatedTarget};
use crate::data::Target;
use crate::error::{Error, Result};
use crate::metrics::mae;
use crate::nn::{fit, loss, Learner, LossKind, TrainOptions};
use crate::tensor::{Parameter, Tensor};

/// CNN-T and CNN-S joined by a fusion head, in residual form
/// `G(x) = x + f(x, window, frame)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedModel {
    pub temporal: Donor,
    pub spatial: Donor,
    pub head: FusionHead,
}

/// One fused training example with raw donor inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedSample {
    pub window: Tensor,
    pub frame: Tensor,
    pub state: Vec<f64>,
    pub target: Vec<f64>,
}

/// One example with precomputed (frozen) donor feature banks.
#[derive(Debug, Clone, PartialEq)]
pub struct BankSample {
    pub bank_a: Tensor,
    pub bank_b: Tensor,
    pub state: Vec<f64>,
    pub target: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusedTrainOptions {
    pub train: TrainOptions,
    /// Also update the donor networks.
    pub fine_tune: bool,
}

impl Default for FusedTrainOptions {
    fn default() -> Self {
        Self {
            train: TrainOptions::default(),
            fine_tune: false,
        }
    }
}

impl FusedModel {
    pub fn new(temporal: Donor, spatial: Donor, config: &FusionConfig, seed: u64) -> Result<Self> {
        if temporal.targets() != spatial.targets() {
            return Err(Error::config(format!(
                "donors predict different targets: {:?} vs {:?}",
                temporal.targets(),
                spatial.targets()
            )));
        }
        let n = temporal.targets().len();
        let shapes = HeadShapes {
            bank_a: temporal.bank_shape().to_vec(),
            bank_b: spatial.bank_shape().to_vec(),
            state: n,
            outputs: n,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let head = FusionHead::build(config, shapes, &mut rng)?;
        Ok(Self {
            temporal,
            spatial,
            head,
        })
    }

    pub fn targets(&self) -> &[Target] {
        self.temporal.targets()
    }

    pub fn banks(&self, window: &Tensor, frame: &Tensor) -> Result<(Tensor, Tensor)> {
        Ok((self.temporal.bank(window)?, self.spatial.bank(frame)?))
    }

    /// The network increment `f` for already computed banks.
    pub fn increment_from_banks(&self, bank_a: &Tensor, bank_b: &Tensor, state: &[f64]) -> Result<Vec<f64>> {
        Ok(self.head.forward(bank_a, bank_b, state)?.output().data().to_vec())
    }

    /// `state + f(state, window, frame)`.
    pub fn predict(&self, window: &Tensor, frame: &Tensor, state: &[f64]) -> Result<Vec<f64>> {
        let (a, b) = self.banks(window, frame)?;
        self.predict_from_banks(&a, &b, state)
    }

    pub fn predict_from_banks(&self, bank_a: &Tensor, bank_b: &Tensor, state: &[f64]) -> Result<Vec<f64>> {
        let f = self.increment_from_banks(bank_a, bank_b, state)?;
        Ok(state.iter().zip(f).map(|(x, d)| x + d).collect())
    }

    pub fn set_fine_tune(&mut self, fine_tune: bool) {
        self.temporal.set_frozen(!fine_tune);
        self.spatial.set_frozen(!fine_tune);
    }

    pub fn parameter_count(&self) -> usize {
        self.temporal.network.parameter_count() + self.spatial.network.parameter_count() + self.head.parameter_count()
    }

    fn donor_fingerprint(&self) -> String {
        crate::tensor::fingerprint_params(
            self.temporal
                .network
                .parameters()
                .chain(self.spatial.network.parameters()),
        )
    }
}

fn residual_loss(state: &[f64], increment: &Tensor, target: &[f64], kind: LossKind) -> Result<(f64, Tensor)> {
    if state.len() != target.len() || increment.len() != target.len() {
        return Err(Error::shape(
            "fused_loss",
            format!(
                "state {}, increment {}, target {}",
                state.len(),
                increment.len(),
                target.len()
            ),
        ));
    }
    let pred = Tensor::vector(state.iter().zip(increment.data()).map(|(x, d)| x + d).collect());
    loss(&pred, &Tensor::vector(target.to_vec()), kind)
}

impl Learner for FusionHead {
    type Example = BankSample;

    fn example_gradients(&self, ex: &BankSample, kind: LossKind) -> Result<(f64, Vec<Tensor>)> {
        let trace = self.forward(&ex.bank_a, &ex.bank_b, &ex.state)?;
        let (value, g) = residual_loss(&ex.state, trace.output(), &ex.target, kind)?;
        let grads = self.backward(&trace, &ex.bank_a, &ex.bank_b, &g)?;
        Ok((value, grads.params))
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        FusionHead::parameters_mut(self)
    }
}

/// End-to-end gradients: head parameters, then CNN-T, then CNN-S.
impl Learner for FusedModel {
    type Example = FusedSample;

    fn example_gradients(&self, ex: &FusedSample, kind: LossKind) -> Result<(f64, Vec<Tensor>)> {
        use super::config::TAP_LAYER;
        let ta = self.temporal.network.forward_trace(&ex.window)?;
        let tb = self.spatial.network.forward_trace(&ex.frame)?;
        let (bank_a, bank_b) = (&ta.activations[TAP_LAYER], &tb.activations[TAP_LAYER]);
        let trace = self.head.forward(bank_a, bank_b, &ex.state)?;
        let (value, g) = residual_loss(&ex.state, trace.output(), &ex.target, kind)?;
        let head = self.head.backward(&trace, bank_a, bank_b, &g)?;
        let ga = self.temporal.network.backward_prefix(&ta, TAP_LAYER, &head.bank_a)?;
        let gb = self.spatial.network.backward_prefix(&tb, TAP_LAYER, &head.bank_b)?;
        let mut grads = head.params;
        grads.extend(ga.params);
        grads.extend(gb.params);
        Ok((value, grads))
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        let mut out = self.head.parameters_mut();
        out.extend(self.temporal.network.parameters_mut());
        out.extend(self.spatial.network.parameters_mut());
        out
    }
}

/// Fits a donor on `(input, target)` pairs and marks it trained.
pub fn train_donor(donor: &mut Donor, examples: &[(Tensor, Tensor)], opts: &TrainOptions) -> Result<Vec<f64>> {
    let trace = fit(&mut donor.network, examples, opts)
        .map_err(|e| Error::precondition("train", format!("{}: {e}", donor.config.name())))?;
    donor.trained = true;
    Ok(trace)
}

/// Mean absolute error over all examples and outputs.
pub fn evaluate_donor(donor: &Donor, examples: &[(Tensor, Tensor)]) -> Result<f64> {
    let preds: Vec<Vec<f64>> = examples
        .par_iter()
        .map(|(x, _)| donor.network.predict(x).map(Tensor::into_data))
        .collect::<Result<_>>()?;
    let p: Vec<f64> = preds.into_iter().flatten().collect();
    let t: Vec<f64> = examples.iter().flat_map(|(_, y)| y.data().iter().copied()).collect();
    mae(&p, &t)
}

/// Joins the three streams by date, failing with every unmatched date.
pub fn align_streams(
    temporal: &[DatedInput],
    spatial: &[DatedInput],
    truth: &[DatedTarget],
) -> Result<Vec<FusedSample>> {
    let t: BTreeMap<_, _> = temporal.iter().map(|d| (d.date, &d.input)).collect();
    let s: BTreeMap<_, _> = spatial.iter().map(|d| (d.date, &d.input)).collect();
    let mut unmatched: Vec<String> = Vec::new();
    let mut samples = Vec::with_capacity(truth.len());
    for g in truth {
        match (t.get(&g.date), s.get(&g.date)) {
            (Some(w), Some(f)) => samples.push(FusedSample {
                window: (*w).clone(),
                frame: (*f).clone(),
                state: g.state.clone(),
                target: g.target.clone(),
            }),
            _ => unmatched.push(g.date.to_string()),
        }
    }
    let known: std::collections::BTreeSet<_> = truth.iter().map(|g| g.date).collect();
    for date in t.keys().chain(s.keys()) {
        if !known.contains(date) {
            unmatched.push(date.to_string());
        }
    }
    unmatched.sort();
    unmatched.dedup();
    if !unmatched.is_empty() {
        return Err(Error::Alignment(format!(
            "unmatched prediction dates: {}",
            unmatched.join(", ")
        )));
    }
    Ok(samples)
}

/// Trains the fusion head (and, with `fine_tune`, the donors) on date-aligned
/// streams. Returns the per-epoch loss trace.
pub fn train_fused(
    model: &mut FusedModel,
    temporal: &[DatedInput],
    spatial: &[DatedInput],
    truth: &[DatedTarget],
    opts: &FusedTrainOptions,
) -> Result<Vec<f64>> {
    for donor in [&model.temporal, &model.spatial] {
        if !donor.trained {
            return Err(Error::precondition(
                "train_fused",
                format!("{} must be pre-trained before fusion", donor.config.name()),
            ));
        }
    }
    let samples = align_streams(temporal, spatial, truth)?;
    fit_fused(model, &samples, opts)
}

/// [`train_fused`] on already aligned samples.
pub fn fit_fused(model: &mut FusedModel, samples: &[FusedSample], opts: &FusedTrainOptions) -> Result<Vec<f64>> {
    model.set_fine_tune(opts.fine_tune);
    if opts.fine_tune {
        return fit(model, samples, &opts.train);
    }
    let before = model.donor_fingerprint();
    let banks = bank_samples(model, samples)?;
    let trace = fit(&mut model.head, &banks, &opts.train)?;
    debug_assert_eq!(before, model.donor_fingerprint());
    Ok(trace)
}

pub fn bank_samples(model: &FusedModel, samples: &[FusedSample]) -> Result<Vec<BankSample>> {
    samples
        .par_iter()
        .map(|s| {
            let (bank_a, bank_b) = model.banks(&s.window, &s.frame)?;
            Ok(BankSample {
                bank_a,
                bank_b,
                state: s.state.clone(),
                target: s.target.clone(),
            })
        })
        .collect()
}

pub fn evaluate_fused(model: &FusedModel, samples: &[FusedSample]) -> Result<f64> {
    let preds: Vec<Vec<f64>> = samples
        .par_iter()
        .map(|s| model.predict(&s.window, &s.frame, &s.state))
        .collect::<Result<_>>()?;
    let p: Vec<f64> = preds.into_iter().flatten().collect();
    let t: Vec<f64> = samples.iter().flat_map(|s| s.target.iter().copied()).collect();
    mae(&p, &t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::GridShape;
    use crate::forecast::config::{
        build_spatial_cnn, build_temporal_cnn, SpatialCnnConfig, TemporalCnnConfig, FUSION_WIDTH,
    };
    use chrono::NaiveDate;
    use rand::Rng;

    pub(crate) fn tiny_model(seed: u64) -> FusedModel {
        let t = build_temporal_cnn(
            &TemporalCnnConfig {
                window_size: 4,
                kernel1: (3, 3),
                kernel2: (2, 2),
                filters1: 3,
                filters2: 4,
                fc_sizes: [8, 8, FUSION_WIDTH],
                ..TemporalCnnConfig::default()
            },
            seed,
        )
        .unwrap();
        let s = build_spatial_cnn(
            &SpatialCnnConfig {
                grid: GridShape { rows: 10, cols: 12 },
                kernel1: (3, 3),
                kernel2: (2, 2),
                filters1: 3,
                filters2: 4,
                fc_sizes: [8, 8, 8, FUSION_WIDTH],
                ..SpatialCnnConfig::default()
            },
            seed + 1,
        )
        .unwrap();
        let cfg = FusionConfig {
            length: 6,
            k_out: 4,
            post_filters: 3,
            fc_sizes: vec![5],
            ..FusionConfig::default()
        };
        FusedModel::new(t, s, &cfg, seed + 2).unwrap()
    }

    fn sample(rng: &mut impl Rng) -> FusedSample {
        let mut r = |n: usize| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>();
        FusedSample {
            window: Tensor::new(vec![4, 13], r(52)).unwrap(),
            frame: Tensor::new(vec![10, 12, 1], r(120)).unwrap(),
            state: r(2),
            target: r(2),
        }
    }

    fn date(d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2020, 4, d).unwrap()
    }

    #[test]
    fn zeroed_head_is_identity() {
        let mut m = tiny_model(0);
        m.head.zero();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = sample(&mut rng);
        assert_eq!(m.predict(&s.window, &s.frame, &s.state).unwrap(), s.state);
    }

    #[test]
    fn residual_contract() {
        let m = tiny_model(3);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = sample(&mut rng);
        let (a, b) = m.banks(&s.window, &s.frame).unwrap();
        let f = m.increment_from_banks(&a, &b, &s.state).unwrap();
        let p = m.predict(&s.window, &s.frame, &s.state).unwrap();
        for ((pi, xi), fi) in p.iter().zip(&s.state).zip(&f) {
            assert_eq!(pi - xi, *fi);
        }
        let zeros = m
            .predict(&Tensor::zeros(&[4, 13]), &Tensor::zeros(&[10, 12, 1]), &[0.0, 0.0])
            .unwrap();
        assert!(zeros.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn fused_training_needs_trained_donors() {
        let mut m = tiny_model(0);
        let err = train_fused(&mut m, &[], &[], &[], &FusedTrainOptions::default()).unwrap_err();
        assert!(err.to_string().contains("pre-trained"), "{err}");
    }

    #[test]
    fn frozen_donors_unchanged() {
        let mut m = tiny_model(4);
        m.temporal.trained = true;
        m.spatial.trained = true;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let samples: Vec<FusedSample> = (0..6).map(|_| sample(&mut rng)).collect();
        let mk = |i: usize| date(i as u32 + 1);
        let t: Vec<DatedInput> = samples
            .iter()
            .enumerate()
            .map(|(i, s)| DatedInput {
                date: mk(i),
                input: s.window.clone(),
            })
            .collect();
        let sp: Vec<DatedInput> = samples
            .iter()
            .enumerate()
            .map(|(i, s)| DatedInput {
                date: mk(i),
                input: s.frame.clone(),
            })
            .collect();
        let g: Vec<DatedTarget> = samples
            .iter()
            .enumerate()
            .map(|(i, s)| DatedTarget {
                date: mk(i),
                state: s.state.clone(),
                target: s.target.clone(),
            })
            .collect();
        let before = m.donor_fingerprint();
        let head_before = crate::tensor::fingerprint_params(m.head.parameters());
        let opts = FusedTrainOptions {
            train: TrainOptions {
                epochs: 3,
                batch_size: 2,
                ..TrainOptions::default()
            },
            fine_tune: false,
        };
        train_fused(&mut m, &t, &sp, &g, &opts).unwrap();
        assert_eq!(before, m.donor_fingerprint());
        assert_ne!(head_before, crate::tensor::fingerprint_params(m.head.parameters()));

        let err = train_fused(&mut m, &t[1..], &sp, &g, &opts).unwrap_err();
        assert!(matches!(err, Error::Alignment(_)));
        assert!(err.to_string().contains("2020-04-01"), "{err}");

        let opts = FusedTrainOptions {
            fine_tune: true,
            ..opts
        };
        train_fused(&mut m, &t, &sp, &g, &opts).unwrap();
        assert_ne!(before, m.donor_fingerprint());
    }
}
