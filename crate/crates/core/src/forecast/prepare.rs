//! Normalized model inputs built from a dataset.
//!
//! The example for prediction day `p` pairs the temporal window ending on day
//! `p − 1`, the density frame of day `p − 1` and the state of day `p − 1`
//! with the state of day `p`. Windows may reach back before the start of the
//! range the targets are drawn from; targets never leave it.

use std::ops::Range;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Normalizer, Target};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Normalizers fitted on the training days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scalers {
    pub features: Normalizer,
    /// Single-column normalizer over all density cells.
    pub density: Normalizer,
    pub targets: Normalizer,
    pub target_names: Vec<Target>,
}

impl Scalers {
    /// Normalized state back to case/death counts.
    pub fn inverse_targets(&self, state: &[f64]) -> Vec<f64> {
        self.targets.inverse(state)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatedInput {
    pub date: NaiveDate,
    pub input: Tensor,
}

/// State on the day before `date` and the target on `date`.
#[derive(Debug, Clone, PartialEq)]
pub struct DatedTarget {
    pub date: NaiveDate,
    pub state: Vec<f64>,
    pub target: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub dates: Vec<NaiveDate>,
    pub features: Vec<Vec<f64>>,
    pub frames: Vec<Tensor>,
    pub targets: Vec<Vec<f64>>,
    pub scalers: Scalers,
}

impl Prepared {
    /// Fits all normalizers on days `fit` and normalizes every day.
    pub fn new(ds: &Dataset, targets: &[Target], fit: Range<usize>) -> Result<Self> {
        ds.check_aligned()?;
        if fit.is_empty() || fit.end > ds.len() {
            return Err(Error::precondition(
                "prepare",
                format!("fit range {fit:?} outside {} days", ds.len()),
            ));
        }
        let raw_features = ds.feature_rows()?;
        let raw_targets = ds.target_rows(targets);
        let features = Normalizer::fit(&raw_features[fit.clone()])?;
        let target_scaler = Normalizer::fit(&raw_targets[fit.clone()])?;
        let density = Normalizer::fit_scalar(ds.frames[fit].iter().flat_map(|f| f.grid.data().iter().copied()))?;
        let (m, s) = (density.mean[0], density.std[0]);
        let frames = ds
            .frames
            .iter()
            .map(|f| {
                let shape = f.grid.shape();
                Tensor::new(
                    vec![shape[0], shape[1], 1],
                    f.grid.data().iter().map(|v| (v - m) / s).collect(),
                )
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            dates: ds.dates(),
            features: raw_features.iter().map(|r| features.transform(r)).collect(),
            frames,
            targets: raw_targets.iter().map(|r| target_scaler.transform(r)).collect(),
            scalers: Scalers {
                features,
                density,
                targets: target_scaler,
                target_names: targets.to_vec(),
            },
        })
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    /// Rows `end + 1 − size ..= end` as a `size × features` tensor.
    pub fn window(&self, end: usize, size: usize) -> Result<Tensor> {
        if size == 0 || end + 1 < size || end >= self.len() {
            return Err(Error::precondition(
                "window",
                format!("window of {size} days ending on day {end} outside {} days", self.len()),
            ));
        }
        let width = self.features[0].len();
        let data = self.features[end + 1 - size..=end].iter().flatten().copied().collect();
        Tensor::new(vec![size, width], data)
    }

    /// Prediction days in `range` that have a full window before them.
    pub fn prediction_days(&self, range: Range<usize>, window: usize) -> Vec<usize> {
        range.filter(|&p| p >= window.max(1) && p < self.len()).collect()
    }

    pub fn temporal_examples(&self, days: &[usize], window: usize) -> Result<Vec<(Tensor, Tensor)>> {
        days.iter()
            .map(|&p| Ok((self.window(p - 1, window)?, Tensor::vector(self.targets[p].clone()))))
            .collect()
    }

    pub fn spatial_examples(&self, days: &[usize]) -> Vec<(Tensor, Tensor)> {
        days.iter()
            .map(|&p| (self.frames[p - 1].clone(), Tensor::vector(self.targets[p].clone())))
            .collect()
    }

    /// The three date-keyed streams consumed by fused training.
    pub fn fused_streams(
        &self,
        days: &[usize],
        window: usize,
    ) -> Result<(Vec<DatedInput>, Vec<DatedInput>, Vec<DatedTarget>)> {
        let mut temporal = Vec::with_capacity(days.len());
        let mut spatial = Vec::with_capacity(days.len());
        let mut truth = Vec::with_capacity(days.len());
        for &p in days {
            let date = self.dates[p];
            temporal.push(DatedInput {
                date,
                input: self.window(p - 1, window)?,
            });
            spatial.push(DatedInput {
                date,
                input: self.frames[p - 1].clone(),
            });
            truth.push(DatedTarget {
                date,
                state: self.targets[p - 1].clone(),
                target: self.targets[p].clone(),
            });
        }
        Ok((temporal, spatial, truth))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth::{synthesize_streams, SynthConfig};
    use crate::data::GridShape;

    fn dataset() -> Dataset {
        let cfg = SynthConfig {
            days: 30,
            grid: GridShape { rows: 5, cols: 6 },
            missing_rate: 0.0,
            ..SynthConfig::default()
        };
        let s = synthesize_streams(&cfg, 1).unwrap();
        Dataset {
            temporal: s.temporal,
            truth: s.truth,
            frames: s
                .density
                .iter()
                .map(|d| crate::data::DensityFrame {
                    date: d.date,
                    grid: d.snapshots[0].clone().unwrap(),
                })
                .collect(),
        }
    }

    #[test]
    fn train_rows_are_standardized() {
        let p = Prepared::new(&dataset(), &Target::ALL, 0..20).unwrap();
        for col in 0..2 {
            let mean: f64 = p.targets[..20].iter().map(|r| r[col]).sum::<f64>() / 20.0;
            assert!(mean.abs() < 1e-10);
        }
        let fingerprint = p.scalers.features.fingerprint();
        let _ = p.scalers.features.transform(&p.features[25]);
        assert_eq!(fingerprint, p.scalers.features.fingerprint());
    }

    #[test]
    fn example_alignment() {
        let p = Prepared::new(&dataset(), &[Target::Cases], 0..20).unwrap();
        let days = p.prediction_days(20..30, 7);
        assert_eq!(days, (20..30).collect::<Vec<_>>());
        let (t, s, g) = p.fused_streams(&days, 7).unwrap();
        assert_eq!(t[0].input.shape(), &[7, 13]);
        assert_eq!(t[0].input.data()[..13], p.features[13][..]);
        assert_eq!(s[0].input, p.frames[19]);
        assert_eq!(g[0].state, p.targets[19]);
        assert_eq!(g[0].target, p.targets[20]);
        assert_eq!(p.prediction_days(0..20, 7).len(), 13);
    }
}
