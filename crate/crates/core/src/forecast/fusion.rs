//! Multiplicative fusion of two feature banks.
//!
//! For banks `A` (`d × M`) and `B` (`d × N`) the `k`-th fused map is
//! `c_k = (Σ_i α_ki a_i + γ_k) ⊙ (Σ_j β_kj b_j + δ_k)`. The head projects
//! each donor's flattened conv output to the common length `d`, fuses, and
//! runs a small conv + dense stack whose dense part also sees the current
//! state.

use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{LayerSpec, Network, Padding};
use crate::tensor::{Parameter, Tensor};

/// `out[r×c] = a[r×n] · b[n×c]`.
fn matmul(a: &[f64], b: &[f64], r: usize, n: usize, c: usize) -> Vec<f64> {
    let mut out = vec![0.0; r * c];
    for i in 0..r {
        let row = &mut out[i * c..(i + 1) * c];
        for k in 0..n {
            let x = a[i * n + k];
            if x == 0.0 {
                continue;
            }
            for (o, &y) in row.iter_mut().zip(&b[k * c..(k + 1) * c]) {
                *o += x * y;
            }
        }
    }
    out
}

/// `out[n×c] = aᵀ · b` for `a[r×n]`, `b[r×c]`.
fn matmul_tn(a: &[f64], b: &[f64], r: usize, n: usize, c: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * c];
    for i in 0..r {
        let brow = &b[i * c..(i + 1) * c];
        for k in 0..n {
            let x = a[i * n + k];
            if x == 0.0 {
                continue;
            }
            for (o, &y) in out[k * c..(k + 1) * c].iter_mut().zip(brow) {
                *o += x * y;
            }
        }
    }
    out
}

/// `out[r×n] = a · bᵀ` for `a[r×c]`, `b[n×c]`.
fn matmul_nt(a: &[f64], b: &[f64], r: usize, c: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; r * n];
    for i in 0..r {
        let arow = &a[i * c..(i + 1) * c];
        for k in 0..n {
            out[i * n + k] = arow.iter().zip(&b[k * c..(k + 1) * c]).map(|(x, y)| x * y).sum();
        }
    }
    out
}

fn uniform(shape: &[usize], bound: f64, rng: &mut impl Rng) -> Tensor {
    let dist = Uniform::new_inclusive(-bound, bound);
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| dist.sample(rng)).collect()).expect("shape product")
}

fn dims2(t: &Tensor, what: &str) -> Result<(usize, usize)> {
    match *t.shape() {
        [r, c] => Ok((r, c)),
        _ => Err(Error::shape(
            "fuse_forward",
            format!("{what} must be 2-D, got {:?}", t.shape()),
        )),
    }
}

/// The per-map mixing weights `α`, `β`, `γ`, `δ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionWeights {
    /// `K_out × M`
    pub alpha: Parameter,
    /// `K_out × N`
    pub beta: Parameter,
    pub gamma: Parameter,
    pub delta: Parameter,
}

impl FusionWeights {
    pub fn new(alpha: Tensor, beta: Tensor, gamma: Tensor, delta: Tensor) -> Result<Self> {
        let (k, _) = dims2(&alpha, "alpha")?;
        let (kb, _) = dims2(&beta, "beta")?;
        if k != kb {
            return Err(Error::shape(
                "fusion_weights",
                format!("alpha has {k} rows but beta has {kb}"),
            ));
        }
        if gamma.shape() != [k] || delta.shape() != [k] {
            return Err(Error::shape(
                "fusion_weights",
                format!(
                    "gamma {:?} and delta {:?} must have length {k}",
                    gamma.shape(),
                    delta.shape()
                ),
            ));
        }
        Ok(Self {
            alpha: Parameter::new(alpha),
            beta: Parameter::new(beta),
            gamma: Parameter::new(gamma),
            delta: Parameter::new(delta),
        })
    }

    /// Glorot-uniform mixing weights with unit offsets, so every fused map
    /// starts out carrying both linear terms as well as their product.
    pub fn random(k_out: usize, m: usize, n: usize, rng: &mut impl Rng) -> Self {
        Self {
            alpha: Parameter::new(uniform(&[k_out, m], (6.0 / (k_out + m) as f64).sqrt(), rng)),
            beta: Parameter::new(uniform(&[k_out, n], (6.0 / (k_out + n) as f64).sqrt(), rng)),
            gamma: Parameter::new(Tensor::filled(&[k_out], 1.0)),
            delta: Parameter::new(Tensor::filled(&[k_out], 1.0)),
        }
    }

    pub fn k_out(&self) -> usize {
        self.alpha.shape()[0]
    }

    pub fn m(&self) -> usize {
        self.alpha.shape()[1]
    }

    pub fn n(&self) -> usize {
        self.beta.shape()[1]
    }

    fn check(&self, a: &Tensor, b: &Tensor) -> Result<usize> {
        let (d, m) = dims2(a, "A")?;
        let (db, n) = dims2(b, "B")?;
        if d != db {
            return Err(Error::shape("fuse_forward", format!("A has {d} rows but B has {db}")));
        }
        if m != self.m() || n != self.n() {
            return Err(Error::shape(
                "fuse_forward",
                format!(
                    "banks with {m} and {n} maps vs head expecting {} and {}",
                    self.m(),
                    self.n()
                ),
            ));
        }
        Ok(d)
    }

    /// `(U, V)` with `U = A αᵀ + γ` and `V = B βᵀ + δ`, both `d × K_out`.
    fn factors(&self, a: &Tensor, b: &Tensor, d: usize) -> (Vec<f64>, Vec<f64>) {
        let k = self.k_out();
        let mut u = matmul_nt(a.data(), self.alpha.value.data(), d, self.m(), k);
        let mut v = matmul_nt(b.data(), self.beta.value.data(), d, self.n(), k);
        for row in u.chunks_exact_mut(k) {
            row.iter_mut().zip(self.gamma.value.data()).for_each(|(x, g)| *x += g);
        }
        for row in v.chunks_exact_mut(k) {
            row.iter_mut().zip(self.delta.value.data()).for_each(|(x, g)| *x += g);
        }
        (u, v)
    }

    fn parameters(&self) -> [&Parameter; 4] {
        [&self.alpha, &self.beta, &self.gamma, &self.delta]
    }

    fn parameters_mut(&mut self) -> [&mut Parameter; 4] {
        [&mut self.alpha, &mut self.beta, &mut self.gamma, &mut self.delta]
    }
}

/// Fused maps `C` (`d × K_out`) for banks `A` (`d × M`) and `B` (`d × N`).
pub fn fuse_forward(a: &Tensor, b: &Tensor, w: &FusionWeights) -> Result<Tensor> {
    let d = w.check(a, b)?;
    let (u, v) = w.factors(a, b, d);
    let c = u.iter().zip(&v).map(|(x, y)| x * y).collect();
    Tensor::new(vec![d, w.k_out()], c)
}

#[derive(Debug, Clone)]
pub struct FusionGradients {
    pub alpha: Tensor,
    pub beta: Tensor,
    pub gamma: Tensor,
    pub delta: Tensor,
    pub a: Tensor,
    pub b: Tensor,
}

/// Gradients of `Σ grad ⊙ fuse_forward(A, B)` with respect to every input.
pub fn fuse_backward(a: &Tensor, b: &Tensor, w: &FusionWeights, grad: &Tensor) -> Result<FusionGradients> {
    let d = w.check(a, b)?;
    let k = w.k_out();
    if grad.len() != d * k {
        return Err(Error::shape(
            "fuse_backward",
            format!("gradient {:?}, expected [{d}, {k}]", grad.shape()),
        ));
    }
    let (u, v) = w.factors(a, b, d);
    let gu: Vec<f64> = grad.data().iter().zip(&v).map(|(g, y)| g * y).collect();
    let gv: Vec<f64> = grad.data().iter().zip(&u).map(|(g, x)| g * x).collect();
    let (m, n) = (w.m(), w.n());
    let column_sums = |g: &[f64]| {
        let mut s = vec![0.0; k];
        for row in g.chunks_exact(k) {
            s.iter_mut().zip(row).for_each(|(a, b)| *a += b);
        }
        s
    };
    Ok(FusionGradients {
        alpha: Tensor::new(vec![k, m], matmul_tn(&gu, a.data(), d, k, m))?,
        beta: Tensor::new(vec![k, n], matmul_tn(&gv, b.data(), d, k, n))?,
        gamma: Tensor::vector(column_sums(&gu)),
        delta: Tensor::vector(column_sums(&gv)),
        a: Tensor::new(vec![d, m], matmul(&gu, w.alpha.value.data(), d, k, m))?,
        b: Tensor::new(vec![d, n], matmul(&gv, w.beta.value.data(), d, k, n))?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionConfig {
    /// Common bank length after projection.
    pub length: usize,
    pub k_out: usize,
    pub post_kernel: usize,
    pub post_filters: usize,
    /// Hidden dense sizes after the post-fusion conv; the output layer is added.
    pub fc_sizes: Vec<usize>,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            length: 64,
            k_out: 32,
            post_kernel: 3,
            post_filters: 16,
            fc_sizes: vec![32],
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.length == 0 || self.k_out == 0 || self.post_filters == 0 {
            return Err(Error::config("fusion length, K_out and post filters must be positive"));
        }
        if self.post_kernel == 0 || self.post_kernel > self.length {
            return Err(Error::config(format!(
                "post-fusion kernel {} must lie in 1..={}",
                self.post_kernel, self.length
            )));
        }
        if self.fc_sizes.iter().any(|&s| s == 0) {
            return Err(Error::config("fusion dense sizes must be positive"));
        }
        Ok(())
    }
}

/// Shapes a head is built for: donor bank shapes `[h, w, maps]` and the
/// state width.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadShapes {
    pub bank_a: Vec<usize>,
    pub bank_b: Vec<usize>,
    pub state: usize,
    pub outputs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionHead {
    pub config: FusionConfig,
    pub shapes: HeadShapes,
    /// `d × (h·w)` projection of the temporal bank.
    pub proj_a: Parameter,
    pub proj_b: Parameter,
    pub weights: FusionWeights,
    /// Conv over the `d × 1 × K_out` fused maps, then flatten.
    pub post: Network,
    /// Dense stack over `[post features; state]`.
    pub mlp: Network,
}

/// Activations of one head forward pass.
#[derive(Debug, Clone)]
pub struct HeadTrace {
    pub a: Tensor,
    pub b: Tensor,
    pub post: crate::nn::Trace,
    pub mlp: crate::nn::Trace,
}

impl HeadTrace {
    pub fn output(&self) -> &Tensor {
        self.mlp.output()
    }
}

#[derive(Debug, Clone)]
pub struct HeadGradients {
    /// In [`FusionHead::parameters`] order.
    pub params: Vec<Tensor>,
    pub bank_a: Tensor,
    pub bank_b: Tensor,
    pub state: Vec<f64>,
}

fn bank_dims(shape: &[usize]) -> Result<(usize, usize)> {
    match *shape {
        [h, w, m] if h * w * m > 0 => Ok((h * w, m)),
        _ => Err(Error::shape(
            "fusion_head",
            format!("bank shape {shape:?} must be h×w×maps"),
        )),
    }
}

impl FusionHead {
    pub fn build(config: &FusionConfig, shapes: HeadShapes, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let (pa, m) = bank_dims(&shapes.bank_a)?;
        let (pb, n) = bank_dims(&shapes.bank_b)?;
        let d = config.length;
        let proj_a = Parameter::new(uniform(&[d, pa], (6.0 / (d + pa) as f64).sqrt(), rng));
        let proj_b = Parameter::new(uniform(&[d, pb], (6.0 / (d + pb) as f64).sqrt(), rng));
        let weights = FusionWeights::random(config.k_out, m, n, rng);
        let post = Network::build(
            &[d, 1, config.k_out],
            &[
                LayerSpec::Conv2d {
                    kernel: (config.post_kernel, 1),
                    filters: config.post_filters,
                    padding: Padding::Valid,
                },
                LayerSpec::Relu,
                LayerSpec::Flatten,
            ],
            rng,
        )?;
        let flat = post.output_shape()[0];
        let mut specs = Vec::new();
        for &units in &config.fc_sizes {
            specs.push(LayerSpec::Dense { units });
            specs.push(LayerSpec::Relu);
        }
        specs.push(LayerSpec::Dense { units: shapes.outputs });
        let mlp = Network::build(&[flat + shapes.state], &specs, rng)?;
        Ok(Self {
            config: config.clone(),
            shapes,
            proj_a,
            proj_b,
            weights,
            post,
            mlp,
        })
    }

    pub fn parameters(&self) -> Vec<&Parameter> {
        let mut out = vec![&self.proj_a, &self.proj_b];
        out.extend(self.weights.parameters());
        out.extend(self.post.parameters());
        out.extend(self.mlp.parameters());
        out
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        let mut out = vec![&mut self.proj_a, &mut self.proj_b];
        out.extend(self.weights.parameters_mut());
        out.extend(self.post.parameters_mut());
        out.extend(self.mlp.parameters_mut());
        out
    }

    pub fn named_parameters(&self) -> Vec<(String, &Parameter)> {
        let mut out: Vec<(String, &Parameter)> = vec![
            ("proj_a".into(), &self.proj_a),
            ("proj_b".into(), &self.proj_b),
            ("alpha".into(), &self.weights.alpha),
            ("beta".into(), &self.weights.beta),
            ("gamma".into(), &self.weights.gamma),
            ("delta".into(), &self.weights.delta),
        ];
        out.extend(
            self.post
                .named_parameters()
                .into_iter()
                .map(|(n, p)| (format!("post.{n}"), p)),
        );
        out.extend(
            self.mlp
                .named_parameters()
                .into_iter()
                .map(|(n, p)| (format!("mlp.{n}"), p)),
        );
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.parameters().iter().map(|p| p.value.len()).sum()
    }

    /// Sets every head parameter, so the head outputs exactly zero.
    pub fn zero(&mut self) {
        for p in self.parameters_mut() {
            p.value.fill(0.0);
        }
    }

    fn project(proj: &Parameter, bank: &Tensor, expected: &[usize], d: usize) -> Result<Tensor> {
        let (p, m) = bank_dims(expected)?;
        if bank.len() != p * m {
            return Err(Error::shape(
                "fusion_head",
                format!("bank {:?}, expected {expected:?}", bank.shape()),
            ));
        }
        Tensor::new(vec![d, m], matmul(proj.value.data(), bank.data(), d, p, m))
    }

    pub fn forward(&self, bank_a: &Tensor, bank_b: &Tensor, state: &[f64]) -> Result<HeadTrace> {
        if state.len() != self.shapes.state {
            return Err(Error::shape(
                "fusion_head",
                format!("state of length {}, expected {}", state.len(), self.shapes.state),
            ));
        }
        let d = self.config.length;
        let a = Self::project(&self.proj_a, bank_a, &self.shapes.bank_a, d)?;
        let b = Self::project(&self.proj_b, bank_b, &self.shapes.bank_b, d)?;
        let fused = fuse_forward(&a, &b, &self.weights)?.reshape(vec![d, 1, self.config.k_out])?;
        let post = self.post.forward_trace(&fused)?;
        let mut joined = post.output().data().to_vec();
        joined.extend_from_slice(state);
        let mlp = self.mlp.forward_trace(&Tensor::vector(joined))?;
        Ok(HeadTrace { a, b, post, mlp })
    }

    pub fn backward(
        &self,
        trace: &HeadTrace,
        bank_a: &Tensor,
        bank_b: &Tensor,
        grad_out: &Tensor,
    ) -> Result<HeadGradients> {
        let d = self.config.length;
        let mlp = self.mlp.backward_trace(&trace.mlp, grad_out)?;
        let flat = trace.post.output().len();
        let g_joined = mlp.input.data();
        let post = self
            .post
            .backward_trace(&trace.post, &Tensor::vector(g_joined[..flat].to_vec()))?;
        let g_fused = post.input.reshape(vec![d, self.config.k_out])?;
        let fg = fuse_backward(&trace.a, &trace.b, &self.weights, &g_fused)?;
        let (pa, m) = bank_dims(&self.shapes.bank_a)?;
        let (pb, n) = bank_dims(&self.shapes.bank_b)?;
        let g_proj_a = matmul_nt(fg.a.data(), bank_a.data(), d, m, pa);
        let g_proj_b = matmul_nt(fg.b.data(), bank_b.data(), d, n, pb);
        let g_bank_a = matmul_tn(self.proj_a.value.data(), fg.a.data(), d, pa, m);
        let g_bank_b = matmul_tn(self.proj_b.value.data(), fg.b.data(), d, pb, n);
        let mut params = vec![
            Tensor::new(vec![d, pa], g_proj_a)?,
            Tensor::new(vec![d, pb], g_proj_b)?,
            fg.alpha,
            fg.beta,
            fg.gamma,
            fg.delta,
        ];
        params.extend(post.params);
        params.extend(mlp.params);
        Ok(HeadGradients {
            params,
            bank_a: Tensor::new(self.shapes.bank_a.clone(), g_bank_a)?,
            bank_b: Tensor::new(self.shapes.bank_b.clone(), g_bank_b)?,
            state: g_joined[flat..].to_vec(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
        uniform(shape, 1.0, rng)
    }

    fn weights(k: usize, m: usize, n: usize, rng: &mut ChaCha8Rng) -> FusionWeights {
        FusionWeights::new(
            random(&[k, m], rng),
            random(&[k, n], rng),
            random(&[k], rng),
            random(&[k], rng),
        )
        .unwrap()
    }

    /// Direct triple-sum evaluation of each fused entry.
    fn oracle(a: &Tensor, b: &Tensor, w: &FusionWeights) -> Vec<f64> {
        let (d, m) = (a.shape()[0], a.shape()[1]);
        let n = b.shape()[1];
        let k_out = w.k_out();
        let mut out = vec![0.0; d * k_out];
        for t in 0..d {
            for k in 0..k_out {
                let mut left = w.gamma.value.data()[k];
                for i in 0..m {
                    left += w.alpha.value.data()[k * m + i] * a.data()[t * m + i];
                }
                let mut right = w.delta.value.data()[k];
                for j in 0..n {
                    right += w.beta.value.data()[k * n + j] * b.data()[t * n + j];
                }
                out[t * k_out + k] = left * right;
            }
        }
        out
    }

    #[test]
    fn matches_summation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let a = random(&[6, 4], &mut rng);
            let b = random(&[6, 3], &mut rng);
            let w = weights(5, 4, 3, &mut rng);
            let c = fuse_forward(&a, &b, &w).unwrap();
            for (x, y) in c.data().iter().zip(oracle(&a, &b, &w)) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_stream_suppresses() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random(&[5, 3], &mut rng);
        let b = Tensor::zeros(&[5, 2]);
        let mut w = weights(4, 3, 2, &mut rng);
        w.delta.value.fill(0.0);
        let c = fuse_forward(&a, &b, &w).unwrap();
        assert!(c.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn reduces_to_plain_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random(&[7, 1], &mut rng);
        let b = random(&[7, 1], &mut rng);
        let w = FusionWeights::new(
            Tensor::filled(&[1, 1], 1.0),
            Tensor::filled(&[1, 1], 1.0),
            Tensor::zeros(&[1]),
            Tensor::zeros(&[1]),
        )
        .unwrap();
        let c = fuse_forward(&a, &b, &w).unwrap();
        for ((x, y), z) in a.data().iter().zip(b.data()).zip(c.data()) {
            assert_eq!(x * y, *z);
        }
    }

    #[test]
    fn mismatched_banks_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let w = weights(2, 3, 3, &mut rng);
        assert!(fuse_forward(&Tensor::zeros(&[4, 3]), &Tensor::zeros(&[5, 3]), &w).is_err());
        assert!(fuse_forward(&Tensor::zeros(&[4, 2]), &Tensor::zeros(&[4, 3]), &w).is_err());
        assert!(FusionWeights::new(
            Tensor::zeros(&[2, 3]),
            Tensor::zeros(&[3, 3]),
            Tensor::zeros(&[2]),
            Tensor::zeros(&[2])
        )
        .is_err());
    }

    #[test]
    fn bilinear_in_each_stream() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut w = weights(3, 2, 2, &mut rng);
        w.gamma.value.fill(0.0);
        w.delta.value.fill(0.0);
        let (a1, a2, b) = (
            random(&[4, 2], &mut rng),
            random(&[4, 2], &mut rng),
            random(&[4, 2], &mut rng),
        );
        let combo = a1.scale(2.0).add(&a2.scale(-0.5)).unwrap();
        let lhs = fuse_forward(&combo, &b, &w).unwrap();
        let rhs = fuse_forward(&a1, &b, &w)
            .unwrap()
            .scale(2.0)
            .add(&fuse_forward(&a2, &b, &w).unwrap().scale(-0.5))
            .unwrap();
        for (x, y) in lhs.data().iter().zip(rhs.data()) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    fn fd_check(
        f: impl Fn(&FusionWeights, &Tensor, &Tensor) -> f64,
        w: &FusionWeights,
        a: &Tensor,
        b: &Tensor,
        g: &FusionGradients,
    ) {
        let h = 1e-6;
        let check = |analytic: f64, plus: f64, minus: f64| {
            let numeric = (plus - minus) / (2.0 * h);
            assert!(
                (analytic - numeric).abs() <= 1e-6 * (1.0 + numeric.abs()),
                "{analytic} vs {numeric}"
            );
        };
        for i in 0..a.len() {
            let mut p = a.clone();
            p.data_mut()[i] += h;
            let mut m = a.clone();
            m.data_mut()[i] -= h;
            check(g.a.data()[i], f(w, &p, b), f(w, &m, b));
        }
        for i in 0..w.alpha.value.len() {
            let mut p = w.clone();
            p.alpha.value.data_mut()[i] += h;
            let mut m = w.clone();
            m.alpha.value.data_mut()[i] -= h;
            check(g.alpha.data()[i], f(&p, a, b), f(&m, a, b));
        }
        for i in 0..w.delta.value.len() {
            let mut p = w.clone();
            p.delta.value.data_mut()[i] += h;
            let mut m = w.clone();
            m.delta.value.data_mut()[i] -= h;
            check(g.delta.data()[i], f(&p, a, b), f(&m, a, b));
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = random(&[5, 3], &mut rng);
        let b = random(&[5, 2], &mut rng);
        let w = weights(4, 3, 2, &mut rng);
        let upstream = random(&[5, 4], &mut rng);
        let f = |w: &FusionWeights, a: &Tensor, b: &Tensor| {
            let c = fuse_forward(a, b, w).unwrap();
            c.data().iter().zip(upstream.data()).map(|(x, y)| x * y).sum::<f64>()
        };
        let g = fuse_backward(&a, &b, &w, &upstream).unwrap();
        fd_check(f, &w, &a, &b, &g);
    }

    #[test]
    fn zeroed_head_outputs_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let shapes = HeadShapes {
            bank_a: vec![1, 3, 4],
            bank_b: vec![2, 2, 3],
            state: 2,
            outputs: 2,
        };
        let mut head = FusionHead::build(&FusionConfig::default(), shapes, &mut rng).unwrap();
        head.zero();
        let out = head
            .forward(
                &random(&[1, 3, 4], &mut rng),
                &random(&[2, 2, 3], &mut rng),
                &[0.3, -1.0],
            )
            .unwrap();
        assert_eq!(out.output().data(), &[0.0, 0.0]);
    }
}
