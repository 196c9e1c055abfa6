use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Canonical study length and its train/test/validation day counts.
pub const CANONICAL_DAYS: usize = 115;
pub const CANONICAL_TRAIN: usize = 80;
pub const CANONICAL_TEST: usize = 23;

/// Contiguous chronological day ranges: train, then test, then validation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Range<usize>,
    pub test: Range<usize>,
    pub validation: Range<usize>,
}

impl DatasetSplit {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.test.len(), self.validation.len())
    }
}

/// Splits `days` in the 80 : 23 : 12 proportion of the 115-day study period.
///
/// Every part must hold at least `window_size + 1` days so that it yields at
/// least one supervised pair.
pub fn split_dataset(days: usize, window_size: usize) -> Result<DatasetSplit> {
    let part = |count: usize| (days * count + CANONICAL_DAYS / 2) / CANONICAL_DAYS;
    let train = part(CANONICAL_TRAIN);
    let test = part(CANONICAL_TEST);
    let validation = days.saturating_sub(train + test);
    let min = window_size + 1;
    if train < min || test < min || validation < min {
        return Err(Error::precondition(
            "split_dataset",
            format!("{days} days split into {train}/{test}/{validation}; each part needs ≥ {min} days"),
        ));
    }
    Ok(DatasetSplit {
        train: 0..train,
        test: train..train + test,
        validation: train + test..days,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_split() {
        let s = split_dataset(115, 7).unwrap();
        assert_eq!(s.sizes(), (80, 23, 12));
        assert_eq!(s.train.end, s.test.start);
        assert_eq!(s.test.end, s.validation.start);
        assert_eq!(s.validation.end, 115);
    }

    #[test]
    fn proportional_split() {
        assert_eq!(split_dataset(230, 7).unwrap().sizes(), (160, 46, 24));
    }

    #[test]
    fn too_short() {
        assert!(split_dataset(20, 7).is_err());
    }
}
