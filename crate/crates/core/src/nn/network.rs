//! Sequential networks over the fixed layer vocabulary.

use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use super::ops::{self, Padding, PoolMode};
use crate::error::{Error, Result};
use crate::tensor::{Parameter, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LayerSpec {
    Conv2d {
        kernel: (usize, usize),
        filters: usize,
        #[serde(default)]
        padding: Padding,
    },
    Pool2d {
        #[serde(default)]
        mode: PoolMode,
    },
    Dense {
        units: usize,
    },
    Relu,
    Flatten,
}

impl LayerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            LayerSpec::Conv2d { .. } => "conv2d",
            LayerSpec::Pool2d { .. } => "pool2d",
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Relu => "relu",
            LayerSpec::Flatten => "flatten",
        }
    }

    /// Output shape for `input`, or a message explaining why it cannot compose.
    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>, String> {
        match *self {
            LayerSpec::Conv2d {
                kernel: (k1, k2),
                filters,
                padding,
            } => {
                let &[h, w, _] = input else {
                    return Err(format!("needs an H×W×C input, got {input:?}"));
                };
                if k1 == 0 || k2 == 0 || filters == 0 {
                    return Err("kernel and filter counts must be positive".into());
                }
                if padding == Padding::Valid && (k1 > h || k2 > w) {
                    return Err(format!("kernel {k1}×{k2} exceeds input {h}×{w}"));
                }
                let ho = padding.output_len(h, k1).unwrap_or(0);
                let wo = padding.output_len(w, k2).unwrap_or(0);
                Ok(vec![ho, wo, filters])
            }
            LayerSpec::Pool2d { .. } => {
                let &[h, w, c] = input else {
                    return Err(format!("needs an H×W×C input, got {input:?}"));
                };
                if h < 2 || w < 2 {
                    return Err(format!("input {h}×{w} is smaller than the 2×2 window"));
                }
                Ok(vec![h / 2, w / 2, c])
            }
            LayerSpec::Dense { units } => {
                if input.len() != 1 {
                    return Err(format!("needs a flat input, got {input:?}"));
                }
                if units == 0 {
                    return Err("units must be positive".into());
                }
                Ok(vec![units])
            }
            LayerSpec::Relu => Ok(input.to_vec()),
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Layer {
    spec: LayerSpec,
    input_shape: Vec<usize>,
    output_shape: Vec<usize>,
    params: Vec<Parameter>,
}

/// Activations recorded by one forward pass: `activations[i]` is the input
/// of layer `i`, and the last entry is the network output.
#[derive(Debug, Clone)]
pub struct Trace {
    pub activations: Vec<Tensor>,
}

impl Trace {
    pub fn output(&self) -> &Tensor {
        self.activations.last().expect("trace holds the input")
    }
}

/// Gradients produced by one backward pass.
#[derive(Debug, Clone)]
pub struct Gradients {
    /// One tensor per parameter, in [`Network::parameters`] order.
    pub params: Vec<Tensor>,
    pub input: Tensor,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Network {
    input_shape: Vec<usize>,
    layers: Vec<Layer>,
    #[serde(skip)]
    cache: Option<Trace>,
}

impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        self.input_shape == other.input_shape && self.layers == other.layers
    }
}

/// Glorot uniform bound `√(6 / (fan_in + fan_out))`.
fn glorot(shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Tensor {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound);
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| dist.sample(rng)).collect()).expect("shape product matches")
}

impl Network {
    /// Validates the shape composition and initializes weights from `rng`.
    pub fn build(input_shape: &[usize], specs: &[LayerSpec], rng: &mut impl Rng) -> Result<Self> {
        let mut shape = match input_shape {
            [h, w] => vec![*h, *w, 1],
            other => other.to_vec(),
        };
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::config(format!("empty network input shape {input_shape:?}")));
        }
        let net_input = shape.clone();
        let mut layers = Vec::with_capacity(specs.len());
        for (idx, spec) in specs.iter().enumerate() {
            let out = spec
                .output_shape(&shape)
                .map_err(|msg| Error::config(format!("layer {idx} ({}): {msg}", spec.name())))?;
            let params = match *spec {
                LayerSpec::Conv2d {
                    kernel: (k1, k2),
                    filters,
                    ..
                } => {
                    let cin = shape[2];
                    vec![
                        Parameter::new(glorot(&[k1, k2, cin, filters], k1 * k2 * cin, k1 * k2 * filters, rng)),
                        Parameter::new(Tensor::zeros(&[filters])),
                    ]
                }
                LayerSpec::Dense { units } => {
                    let n = shape[0];
                    vec![
                        Parameter::new(glorot(&[n, units], n, units, rng)),
                        Parameter::new(Tensor::zeros(&[units])),
                    ]
                }
                _ => Vec::new(),
            };
            layers.push(Layer {
                spec: spec.clone(),
                input_shape: shape.clone(),
                output_shape: out.clone(),
                params,
            });
            shape = out;
        }
        Ok(Self {
            input_shape: net_input,
            layers,
            cache: None,
        })
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn output_shape(&self) -> &[usize] {
        self.layers
            .last()
            .map(|l| l.output_shape.as_slice())
            .unwrap_or(&self.input_shape)
    }

    /// Output shape of layer `idx`.
    pub fn layer_output_shape(&self, idx: usize) -> &[usize] {
        &self.layers[idx].output_shape
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn parameters(&self) -> impl Iterator<Item = &Parameter> {
        self.layers.iter().flat_map(|l| l.params.iter())
    }

    pub fn parameters_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        self.layers.iter_mut().flat_map(|l| l.params.iter_mut())
    }

    pub fn parameter_count(&self) -> usize {
        self.parameters().map(|p| p.value.len()).sum()
    }

    /// Named parameter list (`layer{idx}.{weights|bias}`) used by the model container.
    pub fn named_parameters(&self) -> Vec<(String, &Parameter)> {
        let mut out = Vec::new();
        for (idx, layer) in self.layers.iter().enumerate() {
            for (p, name) in layer.params.iter().zip(["weights", "bias"]) {
                out.push((format!("layer{idx}.{name}"), p));
            }
        }
        out
    }

    fn check_input(&self, input: &Tensor) -> Result<Tensor> {
        let expected: usize = self.input_shape.iter().product();
        if input.len() != expected {
            return Err(Error::shape(
                "network",
                format!("input {:?}, expected {:?}", input.shape(), self.input_shape),
            ));
        }
        input.clone().reshape(self.input_shape.clone())
    }

    /// Runs layers `range` on `input` without touching the cache.
    fn run_layer(layer: &Layer, x: &Tensor) -> Result<Tensor> {
        match layer.spec {
            LayerSpec::Conv2d { padding, .. } => {
                ops::conv2d_padded(x, &layer.params[0].value, &layer.params[1].value, padding)
            }
            LayerSpec::Pool2d { mode } => ops::pool2d(x, mode),
            LayerSpec::Dense { .. } => ops::dense_forward(x, &layer.params[0].value, &layer.params[1].value),
            LayerSpec::Relu => Ok(ops::relu(x)),
            LayerSpec::Flatten => x.clone().reshape(vec![x.len()]),
        }
    }

    pub fn forward_trace(&self, input: &Tensor) -> Result<Trace> {
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(self.check_input(input)?);
        for layer in &self.layers {
            let next = Self::run_layer(layer, activations.last().expect("nonempty"))?;
            activations.push(next);
        }
        Ok(Trace { activations })
    }

    /// Output of layers `0..upto` (exclusive), i.e. the input of layer `upto`.
    pub fn forward_prefix(&self, input: &Tensor, upto: usize) -> Result<Tensor> {
        let mut x = self.check_input(input)?;
        for layer in &self.layers[..upto] {
            x = Self::run_layer(layer, &x)?;
        }
        Ok(x)
    }

    /// Output of layers `from..` applied to an intermediate activation.
    pub fn forward_suffix(&self, activation: &Tensor, from: usize) -> Result<Trace> {
        let mut activations = vec![activation.clone()];
        for layer in &self.layers[from..] {
            let next = Self::run_layer(layer, activations.last().expect("nonempty"))?;
            activations.push(next);
        }
        Ok(Trace { activations })
    }

    pub fn predict(&self, input: &Tensor) -> Result<Tensor> {
        Ok(self.forward_trace(input)?.activations.pop().expect("nonempty"))
    }

    /// Back-propagates `grad_out` through a trace produced by this network.
    pub fn backward_trace(&self, trace: &Trace, grad_out: &Tensor) -> Result<Gradients> {
        self.backward_range(trace, 0, grad_out)
    }

    /// Back-propagates through layers `from..`, where `trace` was produced by
    /// [`Network::forward_suffix`] starting at `from` (or a full trace when
    /// `from == 0`). Parameter gradients of earlier layers are zero.
    pub fn backward_range(&self, trace: &Trace, from: usize, grad_out: &Tensor) -> Result<Gradients> {
        let n_active = self.layers.len() - from;
        if trace.activations.len() != n_active + 1 {
            return Err(Error::precondition("backward", "trace does not belong to this network"));
        }
        if grad_out.len() != trace.output().len() {
            return Err(Error::shape(
                "backward",
                format!(
                    "loss gradient {:?} vs output {:?}",
                    grad_out.shape(),
                    trace.output().shape()
                ),
            ));
        }
        self.backward_span(&trace.activations, from, self.layers.len(), grad_out)
    }

    /// Back-propagates a gradient given at the input of layer `upto` through
    /// layers `0..upto` of a full trace. Later layers get zero gradients.
    pub fn backward_prefix(&self, trace: &Trace, upto: usize, grad: &Tensor) -> Result<Gradients> {
        if trace.activations.len() != self.layers.len() + 1 || upto > self.layers.len() {
            return Err(Error::precondition("backward", "trace does not belong to this network"));
        }
        if grad.len() != trace.activations[upto].len() {
            return Err(Error::shape(
                "backward",
                format!(
                    "gradient {:?} vs activation {:?}",
                    grad.shape(),
                    trace.activations[upto].shape()
                ),
            ));
        }
        self.backward_span(&trace.activations, 0, upto, grad)
    }

    /// `activations[i]` is the input of layer `from + i`.
    fn backward_span(&self, activations: &[Tensor], from: usize, to: usize, grad: &Tensor) -> Result<Gradients> {
        let mut per_layer: Vec<Vec<Tensor>> = self
            .layers
            .iter()
            .map(|l| l.params.iter().map(|p| Tensor::zeros(p.shape())).collect())
            .collect();
        let mut g = grad.clone().reshape(activations[to - from].shape().to_vec())?;
        for (offset, layer) in self.layers[from..to].iter().enumerate().rev() {
            let idx = from + offset;
            let x = &activations[offset];
            g = match layer.spec {
                LayerSpec::Conv2d { padding, .. } => {
                    let (gx, gw, gb) =
                        ops::conv2d_backward(x, &layer.params[0].value, &layer.params[1].value, padding, &g)?;
                    per_layer[idx] = vec![gw, gb];
                    gx
                }
                LayerSpec::Pool2d { mode } => ops::pool2d_backward(x, mode, &g)?,
                LayerSpec::Dense { .. } => {
                    let (gx, gw, gb) = ops::dense_backward(x, &layer.params[0].value, &layer.params[1].value, &g)?;
                    per_layer[idx] = vec![gw, gb];
                    gx
                }
                LayerSpec::Relu => ops::relu_backward(x, &g)?,
                LayerSpec::Flatten => g.reshape(x.shape().to_vec())?,
            };
        }
        Ok(Gradients {
            params: per_layer.into_iter().flatten().collect(),
            input: g,
        })
    }

    /// Forward pass that caches activations for a later [`Network::backward`].
    pub fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        let trace = self.forward_trace(input)?;
        let out = trace.output().clone();
        self.cache = Some(trace);
        Ok(out)
    }

    /// Accumulates parameter gradients for the cached forward pass and
    /// returns the gradient with respect to the network input.
    pub fn backward(&mut self, loss_gradient: &Tensor) -> Result<Tensor> {
        let trace = self
            .cache
            .take()
            .ok_or_else(|| Error::precondition("backward", "no cached forward pass"))?;
        let grads = self.backward_trace(&trace, loss_gradient)?;
        self.accumulate(&grads.params)?;
        self.cache = Some(trace);
        Ok(grads.input)
    }

    /// Adds `grads` (in parameter order) into each learnable parameter.
    pub fn accumulate(&mut self, grads: &[Tensor]) -> Result<()> {
        let params: Vec<&mut Parameter> = self.parameters_mut().collect();
        if params.len() != grads.len() {
            return Err(Error::shape(
                "accumulate",
                format!("{} gradients for {} parameters", grads.len(), params.len()),
            ));
        }
        for (p, g) in params.into_iter().zip(grads) {
            if p.learnable {
                p.gradient.accumulate(g)?;
            }
        }
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        self.parameters_mut().for_each(Parameter::zero_grad);
    }

    pub fn set_learnable(&mut self, learnable: bool) {
        self.parameters_mut().for_each(|p| p.learnable = learnable);
    }

    pub fn clear_cache(&mut self) {
        self.cache = None;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::loss::{loss, LossKind};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn shape_error_names_layer() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let specs = [
            LayerSpec::Conv2d {
                kernel: (3, 3),
                filters: 2,
                padding: Padding::Valid,
            },
            LayerSpec::Pool2d { mode: PoolMode::Max },
            LayerSpec::Conv2d {
                kernel: (3, 3),
                filters: 2,
                padding: Padding::Valid,
            },
        ];
        let err = Network::build(&[5, 5, 1], &specs, &mut rng).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("layer 2 (conv2d)"), "{msg}");
    }

    #[test]
    fn backward_without_forward_fails() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut net = Network::build(&[2], &[LayerSpec::Dense { units: 1 }], &mut rng).unwrap();
        assert!(matches!(
            net.backward(&Tensor::vector(vec![1.0])),
            Err(Error::Precondition { .. })
        ));
    }

    #[test]
    fn dense_squared_error_gradient_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = Network::build(&[3], &[LayerSpec::Dense { units: 1 }], &mut rng).unwrap();
        let x = Tensor::vector(vec![0.5, -1.0, 2.0]);
        let y = Tensor::vector(vec![0.3]);
        let pred = net.forward(&x).unwrap();
        let (_, g) = loss(&pred, &y, LossKind::Mse).unwrap();
        net.backward(&g).unwrap();
        let resid = pred.data()[0] - 0.3;
        let grads: Vec<&Parameter> = net.parameters().collect();
        for i in 0..3 {
            let expected = 2.0 * resid * x.data()[i];
            assert!((grads[0].gradient.data()[i] - expected).abs() < 1e-12);
        }
        assert!((grads[1].gradient.data()[0] - 2.0 * resid).abs() < 1e-12);
    }

    #[test]
    fn zero_loss_gradient_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let specs = [
            LayerSpec::Conv2d {
                kernel: (2, 2),
                filters: 3,
                padding: Padding::Valid,
            },
            LayerSpec::Relu,
            LayerSpec::Flatten,
            LayerSpec::Dense { units: 2 },
        ];
        let mut net = Network::build(&[4, 4, 1], &specs, &mut rng).unwrap();
        let x = Tensor::filled(&[4, 4, 1], 0.7);
        net.forward(&x).unwrap();
        net.backward(&Tensor::zeros(&[2])).unwrap();
        assert!(net.parameters().all(|p| p.gradient.data().iter().all(|&g| g == 0.0)));
    }

    #[test]
    fn same_seed_same_weights() {
        let specs = [LayerSpec::Flatten, LayerSpec::Dense { units: 4 }];
        let a = Network::build(&[3, 3, 1], &specs, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = Network::build(&[3, 3, 1], &specs, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }
}
