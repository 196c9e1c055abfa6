//! Small constructed datasets with known structure, used to check that the
//! models and the search machinery recover it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::temporal::N_FEATURES;
use crate::data::GridShape;
use crate::error::{Error, Result};
use crate::forecast::FusedSample;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MultiplicativeSpec {
    pub samples: usize,
    pub window: usize,
    pub grid: GridShape,
    /// Standard deviation of white noise on every input cell.
    pub noise: f64,
}

impl Default for MultiplicativeSpec {
    fn default() -> Self {
        Self {
            samples: 160,
            window: 7,
            grid: GridShape { rows: 12, cols: 16 },
            noise: 0.05,
        }
    }
}

/// Target `u · v` where `u` only shows in the temporal window and `v` only in
/// the density frame. The carried state is zero, so the residual form reduces
/// to the raw network output.
pub fn multiplicative_samples(spec: &MultiplicativeSpec, seed: u64) -> Result<Vec<FusedSample>> {
    if spec.samples == 0 || spec.window == 0 || spec.grid.is_empty() {
        return Err(Error::config(
            "multiplicative dataset needs samples, a window and a grid",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let loading: Vec<f64> = (0..N_FEATURES).map(|_| rng.gen_range(0.5..1.5)).collect();
    let (rows, cols) = (spec.grid.rows, spec.grid.cols);
    let (cr, cc) = (rows as f64 / 2.0, cols as f64 / 2.0);
    let width = (rows.min(cols) as f64 / 4.0).max(1.0);
    let blob: Vec<f64> = (0..rows * cols)
        .map(|i| {
            let (r, c) = ((i / cols) as f64, (i % cols) as f64);
            (-((r - cr).powi(2) + (c - cc).powi(2)) / (2.0 * width * width)).exp()
        })
        .collect();
    let mut out = Vec::with_capacity(spec.samples);
    for _ in 0..spec.samples {
        let u: f64 = rng.gen_range(-1.0..1.0);
        let v: f64 = rng.gen_range(-1.0..1.0);
        let noise = |rng: &mut ChaCha8Rng| spec.noise * rng.sample::<f64, _>(StandardNormal);
        let window = (0..spec.window * N_FEATURES)
            .map(|i| u * loading[i % N_FEATURES] + noise(&mut rng))
            .collect();
        let frame = blob.iter().map(|b| v * b + noise(&mut rng)).collect();
        out.push(FusedSample {
            window: Tensor::new(vec![spec.window, N_FEATURES, 1], window)?,
            frame: Tensor::new(vec![rows, cols, 1], frame)?,
            state: vec![0.0],
            target: vec![u * v],
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantedKernelSpec {
    pub samples: usize,
    pub window: usize,
    /// Width of the generating filter along the feature axis.
    pub kernel: usize,
    pub noise: f64,
}

impl Default for PlantedKernelSpec {
    fn default() -> Self {
        Self {
            samples: 160,
            window: 7,
            kernel: 5,
            noise: 0.02,
        }
    }
}

/// Windows of white noise whose target is a fixed `kernel × kernel` filter
/// applied at the window's centre; a model with a smaller receptive field
/// cannot see all of it.
pub fn planted_kernel_samples(spec: &PlantedKernelSpec, seed: u64) -> Result<Vec<(Tensor, Tensor)>> {
    if spec.kernel == 0 || spec.kernel > spec.window || spec.kernel > N_FEATURES {
        return Err(Error::config(format!(
            "planted kernel {} must fit a {}×{N_FEATURES} window",
            spec.kernel, spec.window
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = spec.kernel;
    let filter: Vec<f64> = (0..k * k).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let norm = filter.iter().map(|w| w * w).sum::<f64>().sqrt();
    let (r0, c0) = ((spec.window - k) / 2, (N_FEATURES - k) / 2);
    (0..spec.samples)
        .map(|_| {
            let x: Vec<f64> = (0..spec.window * N_FEATURES)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect();
            let mut y = 0.0;
            for a in 0..k {
                for b in 0..k {
                    y += filter[a * k + b] * x[(r0 + a) * N_FEATURES + c0 + b];
                }
            }
            let y = y / norm + spec.noise * rng.sample::<f64, _>(StandardNormal);
            Ok((
                Tensor::new(vec![spec.window, N_FEATURES, 1], x)?,
                Tensor::vector(vec![y]),
            ))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_target() {
        let s = multiplicative_samples(
            &MultiplicativeSpec {
                noise: 0.0,
                ..Default::default()
            },
            3,
        )
        .unwrap();
        assert_eq!(s.len(), 160);
        assert_eq!(s[0].window.shape(), &[7, 13, 1]);
        assert_eq!(s[0].frame.shape(), &[12, 16, 1]);
        assert_eq!(
            s,
            multiplicative_samples(
                &MultiplicativeSpec {
                    noise: 0.0,
                    ..Default::default()
                },
                3
            )
            .unwrap()
        );
    }

    #[test]
    fn planted_kernel_bounds() {
        let bad = PlantedKernelSpec {
            kernel: 9,
            ..Default::default()
        };
        assert!(planted_kernel_samples(&bad, 0).is_err());
        let ok = planted_kernel_samples(&PlantedKernelSpec::default(), 0).unwrap();
        let var = ok.iter().map(|(_, y)| y.data()[0].powi(2)).sum::<f64>() / ok.len() as f64;
        assert!((var - 1.0).abs() < 0.3, "{var}");
    }
}
