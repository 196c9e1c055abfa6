use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Floor applied to fitted standard deviations.
pub const MIN_STD: f64 = 1e-12;

/// Per-column mean normalization `(x − mean) / std`, fitted on training rows.
///
/// Uses the population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    pub fn fit<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::precondition("fit_normalizer", "empty training set"))?;
        let width = first.as_ref().len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; width];
        for r in rows {
            let r = r.as_ref();
            if r.len() != width {
                return Err(Error::shape("fit_normalizer", "ragged rows"));
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::precondition("fit_normalizer", "non-finite value"));
            }
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; width];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r.as_ref()).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var.into_iter().map(|s| (s / n).sqrt().max(MIN_STD)).collect();
        Ok(Self { mean, std })
    }

    /// Single-column normalizer over a flat sample (e.g. all density pixels).
    pub fn fit_scalar(values: impl IntoIterator<Item = f64>) -> Result<Self> {
        let (mut n, mut sum, mut sq) = (0usize, 0.0, 0.0);
        let values: Vec<f64> = values.into_iter().collect();
        for &v in &values {
            n += 1;
            sum += v;
        }
        if n == 0 {
            return Err(Error::precondition("fit_normalizer", "empty training set"));
        }
        let mean = sum / n as f64;
        for &v in &values {
            sq += (v - mean) * (v - mean);
        }
        Ok(Self {
            mean: vec![mean],
            std: vec![(sq / n as f64).sqrt().max(MIN_STD)],
        })
    }

    pub fn width(&self) -> usize {
        self.mean.len()
    }

    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        debug_assert_eq!(row.len(), self.width());
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn inverse(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| v * s + m)
            .collect()
    }

    /// Applies column 0's statistics to every value (scalar normalizers).
    pub fn transform_all(&self, values: &[f64]) -> Vec<f64> {
        let (m, s) = (self.mean[0], self.std[0]);
        values.iter().map(|v| (v - m) / s).collect()
    }

    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for v in self.mean.iter().chain(&self.std) {
            h.update(v.to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_values() {
        let n = Normalizer::fit(&[[1.0], [3.0]]).unwrap();
        assert_eq!(n.mean, vec![2.0]);
        assert_eq!(n.std, vec![1.0]);
        assert_eq!(n.transform(&[1.0]), vec![-1.0]);
        assert_eq!(n.transform(&[3.0]), vec![1.0]);
    }

    #[test]
    fn constant_column_is_floored() {
        let n = Normalizer::fit(&[[4.0], [4.0], [4.0]]).unwrap();
        assert_eq!(n.mean, vec![4.0]);
        assert_eq!(n.std, vec![MIN_STD]);
        assert_eq!(n.transform(&[4.0]), vec![0.0]);
    }

    #[test]
    fn empty_is_error() {
        assert!(Normalizer::fit::<Vec<f64>>(&[]).is_err());
    }

    #[test]
    fn transforming_other_rows_does_not_refit() {
        let train = vec![vec![1.0, 10.0], vec![2.0, 30.0], vec![4.0, 20.0]];
        let n = Normalizer::fit(&train).unwrap();
        let before = n.fingerprint();
        let _ = n.transform(&[100.0, -5.0]);
        assert_eq!(n.fingerprint(), before);
    }

    proptest! {
        #[test]
        fn standardizes_and_inverts(rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 3), 2..30)) {
            let n = Normalizer::fit(&rows).unwrap();
            let z: Vec<Vec<f64>> = rows.iter().map(|r| n.transform(r)).collect();
            for c in 0..3 {
                let col: Vec<f64> = z.iter().map(|r| r[c]).collect();
                let mean = col.iter().sum::<f64>() / col.len() as f64;
                prop_assert!(mean.abs() < 1e-10);
                if n.std[c] > 1e-6 {
                    let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / col.len() as f64;
                    prop_assert!((var.sqrt() - 1.0).abs() < 1e-10);
                }
            }
            for r in &rows {
                let back = n.inverse(&n.transform(r));
                for (a, b) in back.iter().zip(r) {
                    prop_assert!((a - b).abs() < 1e-10);
                }
            }
        }
    }
}
