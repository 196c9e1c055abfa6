//! A dataset directory: temporal features, density frames and ground truth
//! over the same days.

use std::collections::BTreeSet;
use std::path::Path;

use chrono::NaiveDate;
use sha2::{Digest, Sha256};

use super::density::{load_density_frames, DensityFrame, GridShape};
use super::synth::{DENSITY_DIR, TEMPORAL_FILE, TRUTH_FILE};
use super::temporal::{interpolate_missing, load_temporal, TemporalRecord, N_FEATURES};
use super::truth::{load_truth, GroundTruth, Target};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub temporal: Vec<TemporalRecord>,
    pub truth: Vec<GroundTruth>,
    pub frames: Vec<DensityFrame>,
}

impl Dataset {
    /// Loads a dataset directory, filling feature gaps by nearest neighbour.
    pub fn load(dir: &Path, grid: GridShape) -> Result<Self> {
        let temporal = interpolate_missing(&load_temporal(&dir.join(TEMPORAL_FILE))?)?;
        let truth = load_truth(&dir.join(TRUTH_FILE))?;
        let frames = load_density_frames(&dir.join(DENSITY_DIR), grid)?;
        let ds = Self {
            temporal,
            truth,
            frames,
        };
        ds.check_aligned()?;
        Ok(ds)
    }

    /// Fails with the unmatched dates unless all three streams cover the same days.
    pub fn check_aligned(&self) -> Result<()> {
        let t: BTreeSet<NaiveDate> = self.temporal.iter().map(|r| r.date).collect();
        let g: BTreeSet<NaiveDate> = self.truth.iter().map(|r| r.date).collect();
        let f: BTreeSet<NaiveDate> = self.frames.iter().map(|r| r.date).collect();
        let all: BTreeSet<NaiveDate> = t.union(&g).chain(f.iter()).copied().collect();
        let unmatched: Vec<String> = all
            .iter()
            .filter(|d| !(t.contains(d) && g.contains(d) && f.contains(d)))
            .map(|d| d.to_string())
            .collect();
        if !unmatched.is_empty() {
            return Err(Error::Alignment(format!(
                "dates missing from at least one stream: {}",
                unmatched.join(", ")
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.truth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.truth.is_empty()
    }

    pub fn dates(&self) -> Vec<NaiveDate> {
        self.truth.iter().map(|g| g.date).collect()
    }

    pub fn feature_rows(&self) -> Result<Vec<[f64; N_FEATURES]>> {
        self.temporal.iter().map(TemporalRecord::complete).collect()
    }

    /// SHA-256 over every date, feature, count and density cell.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for r in &self.temporal {
            h.update(r.date.to_string().as_bytes());
            for f in r.features {
                h.update(f.map_or(f64::NAN, |v| v).to_le_bytes());
            }
        }
        for g in &self.truth {
            h.update(g.date.to_string().as_bytes());
            h.update(g.daily_cases.to_le_bytes());
            h.update(g.daily_deaths.to_le_bytes());
        }
        for f in &self.frames {
            h.update(f.date.to_string().as_bytes());
            h.update(f.grid.fingerprint().as_bytes());
        }
        hex::encode(h.finalize())
    }

    pub fn target_rows(&self, targets: &[Target]) -> Vec<Vec<f64>> {
        self.truth
            .iter()
            .map(|g| targets.iter().map(|t| t.value(g)).collect())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::density::FrameFormat;
    use crate::data::synth::{synthesize_streams, SynthConfig};

    fn cfg() -> SynthConfig {
        SynthConfig {
            days: 20,
            grid: GridShape { rows: 6, cols: 9 },
            missing_rate: 0.0,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let synth = synthesize_streams(&cfg(), 5).unwrap();
        synth.write(dir.path(), FrameFormat::Epif).unwrap();
        let ds = Dataset::load(dir.path(), cfg().grid).unwrap();
        assert_eq!(ds.temporal, synth.temporal);
        assert_eq!(ds.truth, synth.truth);
        for (frame, day) in ds.frames.iter().zip(&synth.density) {
            let present: Vec<_> = day.snapshots.iter().flatten().collect();
            for (i, v) in frame.grid.data().iter().enumerate() {
                let mean = present.iter().map(|t| t.data()[i]).sum::<f64>() / present.len() as f64;
                assert!((v - mean).abs() < 1e-10);
            }
        }
        let mem = synth.to_dataset().unwrap();
        assert_eq!(mem.truth, ds.truth);
        assert_eq!(mem.temporal, ds.temporal);
        for (a, b) in mem.frames.iter().zip(&ds.frames) {
            assert!(a.grid.sub(&b.grid).unwrap().data().iter().all(|d| d.abs() < 1e-10));
        }
    }

    #[test]
    fn misaligned_streams_list_dates() {
        let dir = tempfile::tempdir().unwrap();
        let synth = synthesize_streams(&cfg(), 5).unwrap();
        synth.write(dir.path(), FrameFormat::Csv).unwrap();
        let last = synth.truth.last().unwrap().date;
        for t in ["0800", "1600", "0000"] {
            std::fs::remove_file(dir.path().join(DENSITY_DIR).join(format!("{last}_{t}.csv"))).unwrap();
        }
        let err = Dataset::load(dir.path(), cfg().grid).unwrap_err();
        assert!(matches!(err, Error::Alignment(_)));
        assert!(err.to_string().contains(&last.to_string()));
    }
}
