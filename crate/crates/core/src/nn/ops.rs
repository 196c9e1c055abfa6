//! Forward and backward kernels for the fixed layer vocabulary.
//!
//! Every backward function takes the cached forward input and the gradient
//! of the loss with respect to the forward output, and returns gradients with
//! respect to the input and to each parameter.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Parameter, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    /// No padding, stride 1.
    #[default]
    Valid,
    /// Zero padding so that the output keeps the input's spatial size.
    Same,
}

impl Padding {
    /// Leading padding for a kernel extent.
    fn before(self, k: usize) -> usize {
        match self {
            Padding::Valid => 0,
            Padding::Same => (k - 1) / 2,
        }
    }

    pub fn output_len(self, input: usize, k: usize) -> Option<usize> {
        match self {
            Padding::Valid => input.checked_sub(k).map(|d| d + 1),
            Padding::Same => Some(input),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolMode {
    #[default]
    Max,
    Average,
}

/// Valid (unpadded) stride-1 convolution.
///
/// `weights` is `[K1, K2, C_in, L]`, `bias` is `[L]`.
pub fn conv2d(input: &Tensor, weights: &Parameter, bias: &Parameter) -> Result<Tensor> {
    conv2d_padded(input, &weights.value, &bias.value, Padding::Valid)
}

fn conv_dims(input: &Tensor, weights: &Tensor, bias: &Tensor, padding: Padding) -> Result<ConvDims> {
    let (h, w, c) = input.dims3("conv2d")?;
    let &[k1, k2, cin, l] = weights.shape() else {
        return Err(Error::shape(
            "conv2d",
            format!("weights must be K1×K2×C_in×L, got {:?}", weights.shape()),
        ));
    };
    if cin != c {
        return Err(Error::shape(
            "conv2d",
            format!("input has {c} channels, kernel expects {cin}"),
        ));
    }
    if bias.shape() != [l] {
        return Err(Error::shape(
            "conv2d",
            format!("bias shape {:?}, expected [{l}]", bias.shape()),
        ));
    }
    if padding == Padding::Valid && (k1 > h || k2 > w) {
        return Err(Error::shape(
            "conv2d",
            format!("kernel {k1}×{k2} exceeds input {h}×{w}"),
        ));
    }
    let ho = padding.output_len(h, k1).expect("kernel checked");
    let wo = padding.output_len(w, k2).expect("kernel checked");
    Ok(ConvDims {
        h,
        w,
        c,
        k1,
        k2,
        l,
        ho,
        wo,
        pt: padding.before(k1),
        pl: padding.before(k2),
    })
}

struct ConvDims {
    h: usize,
    w: usize,
    c: usize,
    k1: usize,
    k2: usize,
    l: usize,
    ho: usize,
    wo: usize,
    pt: usize,
    pl: usize,
}

impl ConvDims {
    /// Input row for output row `i` and kernel row `a`, if inside the image.
    #[inline]
    fn row(&self, i: usize, a: usize) -> Option<usize> {
        (i + a).checked_sub(self.pt).filter(|&r| r < self.h)
    }

    #[inline]
    fn col(&self, j: usize, b: usize) -> Option<usize> {
        (j + b).checked_sub(self.pl).filter(|&r| r < self.w)
    }
}

pub fn conv2d_padded(input: &Tensor, weights: &Tensor, bias: &Tensor, padding: Padding) -> Result<Tensor> {
    let d = conv_dims(input, weights, bias, padding)?;
    let x = input.data();
    let wt = weights.data();
    let mut out = vec![0.0; d.ho * d.wo * d.l];
    for i in 0..d.ho {
        for j in 0..d.wo {
            let o = &mut out[(i * d.wo + j) * d.l..][..d.l];
            o.copy_from_slice(bias.data());
            for a in 0..d.k1 {
                let Some(r) = d.row(i, a) else { continue };
                for b in 0..d.k2 {
                    let Some(s) = d.col(j, b) else { continue };
                    let xin = &x[(r * d.w + s) * d.c..][..d.c];
                    let wbase = (a * d.k2 + b) * d.c;
                    for (cc, &xv) in xin.iter().enumerate() {
                        if xv == 0.0 {
                            continue;
                        }
                        let wk = &wt[(wbase + cc) * d.l..][..d.l];
                        for (ov, &wv) in o.iter_mut().zip(wk) {
                            *ov += xv * wv;
                        }
                    }
                }
            }
        }
    }
    Tensor::new(vec![d.ho, d.wo, d.l], out)
}

/// Gradients of a convolution: `(d input, d weights, d bias)`.
pub fn conv2d_backward(
    input: &Tensor,
    weights: &Tensor,
    bias: &Tensor,
    padding: Padding,
    grad_out: &Tensor,
) -> Result<(Tensor, Tensor, Tensor)> {
    let d = conv_dims(input, weights, bias, padding)?;
    if grad_out.shape() != [d.ho, d.wo, d.l] {
        return Err(Error::shape(
            "conv2d_backward",
            format!(
                "output gradient {:?}, expected [{}, {}, {}]",
                grad_out.shape(),
                d.ho,
                d.wo,
                d.l
            ),
        ));
    }
    let x = input.data();
    let wt = weights.data();
    let g = grad_out.data();
    let mut gx = vec![0.0; x.len()];
    let mut gw = vec![0.0; wt.len()];
    let mut gb = vec![0.0; d.l];
    for i in 0..d.ho {
        for j in 0..d.wo {
            let go = &g[(i * d.wo + j) * d.l..][..d.l];
            for (b, &gv) in gb.iter_mut().zip(go) {
                *b += gv;
            }
            for a in 0..d.k1 {
                let Some(r) = d.row(i, a) else { continue };
                for b in 0..d.k2 {
                    let Some(s) = d.col(j, b) else { continue };
                    let xoff = (r * d.w + s) * d.c;
                    let wbase = (a * d.k2 + b) * d.c;
                    for cc in 0..d.c {
                        let xv = x[xoff + cc];
                        let woff = (wbase + cc) * d.l;
                        let wk = &wt[woff..][..d.l];
                        let gwk = &mut gw[woff..][..d.l];
                        let mut acc = 0.0;
                        for ((gwv, &wv), &gv) in gwk.iter_mut().zip(wk).zip(go) {
                            *gwv += xv * gv;
                            acc += wv * gv;
                        }
                        gx[xoff + cc] += acc;
                    }
                }
            }
        }
    }
    Ok((
        Tensor::new(input.shape().to_vec(), gx)?,
        Tensor::new(weights.shape().to_vec(), gw)?,
        Tensor::new(vec![d.l], gb)?,
    ))
}

/// Non-overlapping 2×2 pooling; a trailing odd row or column is dropped.
pub fn pool2d(input: &Tensor, mode: PoolMode) -> Result<Tensor> {
    let (h, w, c) = input.dims3("pool2d")?;
    if h < 2 || w < 2 {
        return Err(Error::shape(
            "pool2d",
            format!("input {h}×{w} is smaller than the 2×2 window"),
        ));
    }
    let (ho, wo) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(ho * wo * c);
    for i in 0..ho {
        for j in 0..wo {
            for cc in 0..c {
                let v = [
                    input.at3(2 * i, 2 * j, cc),
                    input.at3(2 * i, 2 * j + 1, cc),
                    input.at3(2 * i + 1, 2 * j, cc),
                    input.at3(2 * i + 1, 2 * j + 1, cc),
                ];
                out.push(match mode {
                    PoolMode::Max => v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    PoolMode::Average => v.iter().sum::<f64>() / 4.0,
                });
            }
        }
    }
    Tensor::new(vec![ho, wo, c], out)
}

pub fn pool2d_backward(input: &Tensor, mode: PoolMode, grad_out: &Tensor) -> Result<Tensor> {
    let (h, w, c) = input.dims3("pool2d_backward")?;
    let (ho, wo) = (h / 2, w / 2);
    if grad_out.shape() != [ho, wo, c] {
        return Err(Error::shape(
            "pool2d_backward",
            format!("output gradient {:?}, expected [{ho}, {wo}, {c}]", grad_out.shape()),
        ));
    }
    let mut gx = vec![0.0; input.len()];
    let idx = |i: usize, j: usize, cc: usize| (i * w + j) * c + cc;
    for i in 0..ho {
        for j in 0..wo {
            for cc in 0..c {
                let g = grad_out.at3(i, j, cc);
                let cells = [
                    idx(2 * i, 2 * j, cc),
                    idx(2 * i, 2 * j + 1, cc),
                    idx(2 * i + 1, 2 * j, cc),
                    idx(2 * i + 1, 2 * j + 1, cc),
                ];
                match mode {
                    PoolMode::Max => {
                        // first maximal cell receives the gradient
                        let x = input.data();
                        let mut best = cells[0];
                        for &cell in &cells[1..] {
                            if x[cell] > x[best] {
                                best = cell;
                            }
                        }
                        gx[best] += g;
                    }
                    PoolMode::Average => {
                        for cell in cells {
                            gx[cell] += g / 4.0;
                        }
                    }
                }
            }
        }
    }
    Tensor::new(input.shape().to_vec(), gx)
}

/// `output = inputᵀ · weights + bias`, with `weights` of shape `[n, k]`.
pub fn dense(input: &Tensor, weights: &Parameter, bias: &Parameter) -> Result<Tensor> {
    dense_forward(input, &weights.value, &bias.value)
}

fn dense_dims(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<(usize, usize)> {
    let &[n, k] = weights.shape() else {
        return Err(Error::shape(
            "dense",
            format!("weights must be n×k, got {:?}", weights.shape()),
        ));
    };
    if input.len() != n {
        return Err(Error::shape(
            "dense",
            format!("input length {} does not match weight rows {n}", input.len()),
        ));
    }
    if bias.shape() != [k] {
        return Err(Error::shape(
            "dense",
            format!("bias shape {:?}, expected [{k}]", bias.shape()),
        ));
    }
    Ok((n, k))
}

pub(crate) fn dense_forward(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (_, k) = dense_dims(input, weights, bias)?;
    let mut out = bias.data().to_vec();
    for (row, &x) in weights.data().chunks_exact(k).zip(input.data()) {
        if x == 0.0 {
            continue;
        }
        for (o, &wv) in out.iter_mut().zip(row) {
            *o += x * wv;
        }
    }
    Ok(Tensor::vector(out))
}

/// Gradients of a dense layer: `(d input, d weights, d bias)`.
pub fn dense_backward(
    input: &Tensor,
    weights: &Tensor,
    bias: &Tensor,
    grad_out: &Tensor,
) -> Result<(Tensor, Tensor, Tensor)> {
    let (n, k) = dense_dims(input, weights, bias)?;
    if grad_out.len() != k {
        return Err(Error::shape(
            "dense_backward",
            format!("output gradient length {}, expected {k}", grad_out.len()),
        ));
    }
    let g = grad_out.data();
    let mut gx = vec![0.0; n];
    let mut gw = vec![0.0; n * k];
    for (((row, grow), gxv), &x) in weights
        .data()
        .chunks_exact(k)
        .zip(gw.chunks_exact_mut(k))
        .zip(gx.iter_mut())
        .zip(input.data())
    {
        let mut acc = 0.0;
        for ((&wv, gwv), &gv) in row.iter().zip(grow.iter_mut()).zip(g) {
            acc += wv * gv;
            *gwv = x * gv;
        }
        *gxv = acc;
    }
    Ok((
        Tensor::new(input.shape().to_vec(), gx)?,
        Tensor::new(vec![n, k], gw)?,
        Tensor::vector(g.to_vec()),
    ))
}

pub fn relu(input: &Tensor) -> Tensor {
    input.map(|x| x.max(0.0))
}

pub fn relu_backward(input: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
    if input.shape() != grad_out.shape() {
        return Err(Error::shape(
            "relu_backward",
            format!("{:?} vs {:?}", input.shape(), grad_out.shape()),
        ));
    }
    let data = input
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
        .collect();
    Tensor::new(input.shape().to_vec(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
        let n = shape.iter().product();
        Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    fn param(t: Tensor) -> Parameter {
        Parameter::new(t)
    }

    #[test]
    fn conv_identity_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random(&[4, 5, 1], &mut rng);
        let w = param(Tensor::filled(&[1, 1, 1, 1], 1.0));
        let b = param(Tensor::zeros(&[1]));
        let y = conv2d(&x, &w, &b).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn conv_zero_input_gives_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Tensor::zeros(&[5, 5, 2]);
        let w = param(random(&[3, 3, 2, 3], &mut rng));
        let b = param(Tensor::vector(vec![0.5, -1.0, 2.0]));
        let y = conv2d(&x, &w, &b).unwrap();
        assert_eq!(y.shape(), &[3, 3, 3]);
        for chunk in y.data().chunks(3) {
            assert_eq!(chunk, &[0.5, -1.0, 2.0]);
        }
    }

    #[test]
    fn conv_matches_quadruple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random(&[4, 4, 1], &mut rng);
        let w = random(&[2, 2, 1, 1], &mut rng);
        let b = random(&[1], &mut rng);
        let y = conv2d(&x, &param(w.clone()), &param(b.clone())).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let mut s = b.data()[0];
                for a in 0..2 {
                    for bb in 0..2 {
                        s += x.data()[(i + a) * 4 + j + bb] * w.data()[a * 2 + bb];
                    }
                }
                assert!((y.at3(i, j, 0) - s).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn conv_rejects_oversized_kernel() {
        let x = Tensor::zeros(&[3, 3, 1]);
        let w = param(Tensor::zeros(&[4, 1, 1, 1]));
        let b = param(Tensor::zeros(&[1]));
        assert!(matches!(conv2d(&x, &w, &b), Err(Error::Shape { .. })));
    }

    #[test]
    fn same_padding_keeps_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random(&[3, 6, 2], &mut rng);
        let w = random(&[3, 5, 2, 4], &mut rng);
        let y = conv2d_padded(&x, &w, &Tensor::zeros(&[4]), Padding::Same).unwrap();
        assert_eq!(y.shape(), &[3, 6, 4]);
    }

    #[test]
    fn pool_block() {
        let x = Tensor::new(vec![2, 2, 1], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(pool2d(&x, PoolMode::Max).unwrap().data(), &[4.0]);
        assert_eq!(pool2d(&x, PoolMode::Average).unwrap().data(), &[2.5]);
    }

    #[test]
    fn pool_constant_and_odd_edge() {
        let x = Tensor::filled(&[5, 5, 1], 3.0);
        for mode in [PoolMode::Max, PoolMode::Average] {
            let y = pool2d(&x, mode).unwrap();
            assert_eq!(y.shape(), &[2, 2, 1]);
            assert!(y.data().iter().all(|&v| v == 3.0));
        }
        assert!(pool2d(&Tensor::zeros(&[1, 4, 1]), PoolMode::Max).is_err());
    }

    #[test]
    fn dense_identity_and_bias() {
        let x = Tensor::vector(vec![1.0, -2.0, 3.0]);
        let mut eye = Tensor::zeros(&[3, 3]);
        for i in 0..3 {
            eye.data_mut()[i * 3 + i] = 1.0;
        }
        let y = dense(&x, &param(eye), &param(Tensor::zeros(&[3]))).unwrap();
        assert_eq!(y.data(), x.data());
        let b = Tensor::vector(vec![0.25, 7.0]);
        let y = dense(&x, &param(Tensor::zeros(&[3, 2])), &param(b.clone())).unwrap();
        assert_eq!(y.data(), b.data());
    }

    #[test]
    fn dense_matches_dot_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random(&[3], &mut rng);
        let w = random(&[3, 2], &mut rng);
        let b = random(&[2], &mut rng);
        let y = dense(&x, &param(w.clone()), &param(b.clone())).unwrap();
        for j in 0..2 {
            let s: f64 = (0..3).map(|i| x.data()[i] * w.data()[i * 2 + j]).sum::<f64>() + b.data()[j];
            assert!((y.data()[j] - s).abs() < 1e-12);
        }
        assert!(dense(&random(&[4], &mut rng), &param(w), &param(b)).is_err());
    }

    #[test]
    fn relu_cases() {
        let y = relu(&Tensor::vector(vec![-1.0, 0.0, 2.0]));
        assert_eq!(y.data(), &[0.0, 0.0, 2.0]);
        let neg = Tensor::vector(vec![-3.0, -0.5]);
        assert!(relu(&neg).data().iter().all(|&v| v == 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = random(&[10], &mut rng);
        assert_eq!(relu(&relu(&x)), relu(&x));
    }
}
