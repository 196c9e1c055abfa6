//! Dense row-major tensors and learnable parameters.
//!
//! Spatial tensors use height × width × channels layout, so element
//! `(i, j, c)` of an `[H, W, C]` tensor lives at `(i * W + j) * C + c`.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::shape("tensor", format!("zero-sized dimension in {shape:?}")));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::shape(
                "tensor",
                format!("shape {shape:?} needs {expected} values, got {}", data.len()),
            ));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::filled(shape, 0.0)
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Self {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Same data, new shape with the same element count.
    pub fn reshape(self, shape: Vec<usize>) -> Result<Self> {
        Tensor::new(shape, self.data)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn scale(&self, factor: f64) -> Self {
        self.map(|x| x * factor)
    }

    pub fn add(&self, other: &Tensor) -> Result<Self> {
        self.check_same_shape(other, "add")?;
        Ok(Self {
            shape: self.shape.clone(),
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &Tensor) -> Result<Self> {
        self.check_same_shape(other, "sub")?;
        Ok(Self {
            shape: self.shape.clone(),
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    /// In-place `self += other`.
    pub fn accumulate(&mut self, other: &Tensor) -> Result<()> {
        self.check_same_shape(other, "accumulate")?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn fill(&mut self, value: f64) {
        self.data.iter_mut().for_each(|x| *x = value);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Element `(i, j, c)` of an `[H, W, C]` tensor.
    pub fn at3(&self, i: usize, j: usize, c: usize) -> f64 {
        let (w, ch) = (self.shape[1], self.shape[2]);
        self.data[(i * w + j) * ch + c]
    }

    /// Treat the tensor as `[H, W, C]`, promoting 2-D tensors to one channel.
    pub(crate) fn dims3(&self, op: &'static str) -> Result<(usize, usize, usize)> {
        match self.shape.as_slice() {
            [h, w] => Ok((*h, *w, 1)),
            [h, w, c] => Ok((*h, *w, *c)),
            other => Err(Error::shape(op, format!("expected H×W×C input, got {other:?}"))),
        }
    }

    fn check_same_shape(&self, other: &Tensor, op: &'static str) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::shape(op, format!("{:?} vs {:?}", self.shape, other.shape)));
        }
        Ok(())
    }

    /// SHA-256 over shape and little-endian data bytes.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for &d in &self.shape {
            hasher.update((d as u64).to_le_bytes());
        }
        for &x in &self.data {
            hasher.update(x.to_le_bytes());
        }
        hex::encode(hasher.finalize())
    }
}

/// A tensor of weights together with its accumulated gradient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameter {
    pub value: Tensor,
    pub gradient: Tensor,
    pub learnable: bool,
}

impl Parameter {
    pub fn new(value: Tensor) -> Self {
        let gradient = Tensor::zeros(value.shape());
        Self {
            value,
            gradient,
            learnable: true,
        }
    }

    pub fn zero_grad(&mut self) {
        self.gradient.fill(0.0);
    }

    pub fn shape(&self) -> &[usize] {
        self.value.shape()
    }
}

/// Hash of a parameter list's values, used to check freeze contracts.
pub fn fingerprint_params<'a>(params: impl IntoIterator<Item = &'a Parameter>) -> String {
    let mut hasher = Sha256::new();
    for p in params {
        hasher.update(p.value.fingerprint().as_bytes());
    }
    hex::encode(hasher.finalize())
}
