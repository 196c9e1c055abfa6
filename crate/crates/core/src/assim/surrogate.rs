use std::path::Path;

use crate::data::{Normalizer, Target};
use crate::error::{Error, Result};
use crate::forecast::FusedModel;
use crate::tensor::Tensor;

use super::enkf::{FilterRun, ForwardModel};

pub const FILTER_CSV_HEADER: [&str; 9] = [
    "day",
    "observed_cases",
    "observed_deaths",
    "analysis_cases",
    "analysis_deaths",
    "forecast_cases",
    "forecast_deaths",
    "ensemble_spread_cases",
    "ensemble_spread_deaths",
];

/// The fused network as a one-day propagator. `banks[k]` holds the feature
/// banks computed from the window and frame of day `k`; the donors run once
/// per day rather than once per member.
pub struct FusedForward<'a> {
    pub model: &'a FusedModel,
    pub banks: Vec<(Tensor, Tensor)>,
}

impl<'a> FusedForward<'a> {
    pub fn new(model: &'a FusedModel, inputs: &[(Tensor, Tensor)]) -> Result<Self> {
        let banks = inputs.iter().map(|(w, f)| model.banks(w, f)).collect::<Result<_>>()?;
        Ok(Self { model, banks })
    }
}

impl ForwardModel for FusedForward<'_> {
    fn state_dim(&self) -> usize {
        self.model.targets().len()
    }

    fn step(&self, day: usize, state: &[f64]) -> Result<Vec<f64>> {
        let (a, b) = self.banks.get(day).ok_or_else(|| {
            Error::precondition(
                "fused_forward",
                format!("no exogenous inputs for day {day} ({} available)", self.banks.len()),
            )
        })?;
        self.model.predict_from_banks(a, b, state)
    }
}

/// One row per filtered day, in counts when `scaler` is given. Columns for
/// a target outside `targets` are left empty.
pub fn write_filter_csv(
    path: &Path,
    run: &FilterRun,
    labels: &[String],
    targets: &[Target],
    scaler: Option<&Normalizer>,
) -> Result<()> {
    if labels.len() != run.days.len() {
        return Err(Error::shape(
            "write_filter_csv",
            format!("{} labels for {} days", labels.len(), run.days.len()),
        ));
    }
    let level = |v: &[f64]| scaler.map_or_else(|| v.to_vec(), |s| s.inverse(v));
    let spread = |v: &[f64]| match scaler {
        Some(s) => v.iter().zip(&s.std).map(|(a, b)| a * b).collect(),
        None => v.to_vec(),
    };
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::file(path, e.to_string()))?;
    w.write_record(FILTER_CSV_HEADER)?;
    for (label, d) in labels.iter().zip(&run.days) {
        let cols = [
            level(&d.observed),
            level(&d.analysis),
            level(&d.forecast),
            spread(&d.spread),
        ];
        let mut row = vec![label.clone()];
        for col in &cols {
            for t in Target::ALL {
                row.push(
                    targets
                        .iter()
                        .position(|x| *x == t)
                        .map_or_else(String::new, |i| format!("{:.6}", col[i])),
                );
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assim::enkf::forecast_step;
    use crate::data::GridShape;
    use crate::forecast::{build_spatial_cnn, build_temporal_cnn, FusionConfig, SpatialCnnConfig, TemporalCnnConfig};

    fn model() -> FusedModel {
        let t = build_temporal_cnn(
            &TemporalCnnConfig {
                window_size: 4,
                kernel1: (2, 2),
                kernel2: (2, 2),
                filters1: 2,
                filters2: 2,
                fc_sizes: [4, 4, 64],
                ..Default::default()
            },
            1,
        )
        .unwrap();
        let s = build_spatial_cnn(
            &SpatialCnnConfig {
                grid: GridShape { rows: 8, cols: 8 },
                kernel1: (2, 2),
                kernel2: (2, 2),
                filters1: 2,
                filters2: 2,
                fc_sizes: [4, 4, 4, 64],
                ..Default::default()
            },
            2,
        )
        .unwrap();
        FusedModel::new(
            t,
            s,
            &FusionConfig {
                length: 8,
                k_out: 3,
                ..Default::default()
            },
            3,
        )
        .unwrap()
    }

    fn inputs(days: usize) -> Vec<(Tensor, Tensor)> {
        (0..days)
            .map(|d| {
                let w = Tensor::new(vec![4, 13, 1], (0..52).map(|i| ((i + d) as f64 * 0.37).sin()).collect()).unwrap();
                let f = Tensor::new(vec![8, 8, 1], (0..64).map(|i| ((i * d) as f64 * 0.11).cos()).collect()).unwrap();
                (w, f)
            })
            .collect()
    }

    #[test]
    fn zeroed_head_is_identity() {
        let mut m = model();
        m.head.zero();
        let fwd = FusedForward::new(&m, &inputs(2)).unwrap();
        let members = vec![vec![0.3, -1.0], vec![2.0, 0.5]];
        assert_eq!(forecast_step(&members, 1, &fwd).unwrap(), members);
    }

    #[test]
    fn members_advance_independently() {
        let m = model();
        let fwd = FusedForward::new(&m, &inputs(2)).unwrap();
        let (a, b) = (vec![0.3, -1.0], vec![2.0, 0.5]);
        let out = forecast_step(&[a.clone(), b.clone(), a.clone()], 0, &fwd).unwrap();
        assert_eq!(out[0], fwd.step(0, &a).unwrap());
        assert_eq!(out[1], fwd.step(0, &b).unwrap());
        assert_eq!(out[0], out[2]);
        let direct = m.predict(&inputs(1)[0].0, &inputs(1)[0].1, &a).unwrap();
        assert_eq!(out[0], direct);
        assert!(fwd.step(2, &a).is_err());
    }
}
