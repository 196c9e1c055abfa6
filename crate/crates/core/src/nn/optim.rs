//! Stochastic gradient descent and the mini-batch training loop.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::loss::{loss, LossKind};
use super::network::Network;
use crate::error::{Error, Result};
use crate::tensor::{Parameter, Tensor};

/// `value ← value − lr · gradient` for learnable parameters, then zero all gradients.
///
/// Fails without touching any value when a gradient is non-finite.
pub fn sgd_step<'a>(params: impl IntoIterator<Item = &'a mut Parameter>, learning_rate: f64) -> Result<()> {
    if !(learning_rate >= 0.0 && learning_rate.is_finite()) {
        return Err(Error::config(format!(
            "learning rate {learning_rate} must be finite and ≥ 0"
        )));
    }
    let mut params: Vec<&mut Parameter> = params.into_iter().collect();
    if let Some(bad) = params.iter().position(|p| !p.gradient.is_finite()) {
        return Err(Error::Divergence(format!("non-finite gradient in parameter {bad}")));
    }
    for p in params.iter_mut() {
        if p.learnable && learning_rate != 0.0 {
            let Parameter { value, gradient, .. } = &mut **p;
            for (v, g) in value.data_mut().iter_mut().zip(gradient.data()) {
                *v -= learning_rate * g;
            }
        }
        p.zero_grad();
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainOptions {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub loss: LossKind,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            epochs: 200,
            learning_rate: 0.01,
            batch_size: 16,
            loss: LossKind::Mse,
            seed: 0,
        }
    }
}

/// Anything trainable by [`fit`]: per-example gradients are computed on a
/// shared reference (so a batch can be evaluated in parallel) and applied
/// through [`Learner::parameters_mut`] in the same order.
pub trait Learner: Sync {
    type Example: Sync;

    fn example_gradients(&self, example: &Self::Example, kind: LossKind) -> Result<(f64, Vec<Tensor>)>;

    fn parameters_mut(&mut self) -> Vec<&mut Parameter>;
}

impl Learner for Network {
    type Example = (Tensor, Tensor);

    fn example_gradients(&self, (x, y): &Self::Example, kind: LossKind) -> Result<(f64, Vec<Tensor>)> {
        let trace = self.forward_trace(x)?;
        let (value, g) = loss(trace.output(), y, kind)?;
        let grads = self.backward_trace(&trace, &g)?;
        Ok((value, grads.params))
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        Network::parameters_mut(self).collect()
    }
}

/// Examples whose gradients are summed sequentially before the cross-chunk reduction.
const GRADIENT_CHUNK: usize = 4;

/// Mini-batch SGD; returns the mean training loss of every epoch.
///
/// Batch gradients are reduced in example order, so results do not depend on
/// the number of worker threads.
pub fn fit<L: Learner>(learner: &mut L, examples: &[L::Example], opts: &TrainOptions) -> Result<Vec<f64>> {
    if examples.is_empty() {
        return Err(Error::precondition("train", "empty training set"));
    }
    if opts.batch_size == 0 {
        return Err(Error::config("batch size must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut trace = Vec::with_capacity(opts.epochs);
    for epoch in 0..opts.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(opts.batch_size) {
            // fixed-size chunks summed in order keep the reduction independent
            // of the thread count while bounding the number of live gradients
            let partials: Vec<(f64, Vec<Tensor>)> = batch
                .par_chunks(GRADIENT_CHUNK)
                .map(|chunk| {
                    let mut acc: Option<(f64, Vec<Tensor>)> = None;
                    for &i in chunk {
                        let (value, grads) = learner.example_gradients(&examples[i], opts.loss)?;
                        match acc.as_mut() {
                            None => acc = Some((value, grads)),
                            Some((v, a)) => {
                                *v += value;
                                if a.len() != grads.len() {
                                    return Err(Error::shape("train", "inconsistent gradient count"));
                                }
                                for (t, g) in a.iter_mut().zip(&grads) {
                                    t.accumulate(g)?;
                                }
                            }
                        }
                    }
                    Ok(acc.expect("chunks are nonempty"))
                })
                .collect::<Result<_>>()?;
            let scale = 1.0 / batch.len() as f64;
            let mut params = learner.parameters_mut();
            for (value, grads) in &partials {
                total += value;
                if grads.len() != params.len() {
                    return Err(Error::shape(
                        "train",
                        format!("{} gradients for {} parameters", grads.len(), params.len()),
                    ));
                }
                for (p, g) in params.iter_mut().zip(grads) {
                    for (pg, gv) in p.gradient.data_mut().iter_mut().zip(g.data()) {
                        *pg += gv * scale;
                    }
                }
            }
            sgd_step(params, opts.learning_rate)?;
        }
        let mean = total / examples.len() as f64;
        if !mean.is_finite() {
            return Err(Error::Divergence(format!("loss became {mean} in epoch {epoch}")));
        }
        trace.push(mean);
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_learning_rate_keeps_values() {
        let mut p = Parameter::new(Tensor::vector(vec![1.0, 2.0]));
        p.gradient = Tensor::vector(vec![3.0, -4.0]);
        sgd_step([&mut p], 0.0).unwrap();
        assert_eq!(p.value.data(), &[1.0, 2.0]);
        assert!(p.gradient.data().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn single_step_arithmetic() {
        let mut p = Parameter::new(Tensor::vector(vec![1.0]));
        p.gradient = Tensor::vector(vec![0.5]);
        sgd_step([&mut p], 0.1).unwrap();
        assert!((p.value.data()[0] - 0.95).abs() < 1e-15);
    }

    #[test]
    fn non_finite_gradient_rejected() {
        let mut p = Parameter::new(Tensor::vector(vec![1.0]));
        p.gradient = Tensor::vector(vec![f64::NAN]);
        assert!(matches!(sgd_step([&mut p], 0.1), Err(Error::Divergence(_))));
        assert_eq!(p.value.data(), &[1.0]);
    }

    #[test]
    fn converges_on_convex_quadratic() {
        // f(v) = Σ c_i (v_i − m_i)², minimizer m
        let m = [3.0, -1.5, 0.25];
        let c = [1.0, 2.0, 0.5];
        let mut p = Parameter::new(Tensor::vector(vec![0.0; 3]));
        for _ in 0..2000 {
            let g: Vec<f64> = (0..3).map(|i| 2.0 * c[i] * (p.value.data()[i] - m[i])).collect();
            p.gradient = Tensor::vector(g);
            sgd_step([&mut p], 0.1).unwrap();
        }
        for i in 0..3 {
            assert!((p.value.data()[i] - m[i]).abs() < 1e-6);
        }
    }
}
