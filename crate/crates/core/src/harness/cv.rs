//! Forward-chaining blocked cross-validation over a chronological index range.

use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CV_PROTOCOL: &str =
    "forward-chaining blocked CV: k+1 contiguous blocks; fold i trains on blocks 0..=i and evaluates block i+1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub index: usize,
    pub train: Range<usize>,
    pub eval: Range<usize>,
}

/// Splits `range` into `k + 1` near-equal contiguous blocks. Fold `i` trains
/// on everything before block `i + 1` and evaluates on it.
pub fn blocked_folds(range: Range<usize>, k: usize, min_block: usize) -> Result<Vec<Fold>> {
    if k == 0 {
        return Err(Error::config("cross-validation needs k ≥ 1"));
    }
    let n = range.len();
    let blocks = k + 1;
    if n / blocks < min_block.max(1) {
        return Err(Error::precondition(
            "cross_validate",
            format!("{n} days cannot form {blocks} blocks of ≥ {min_block} days"),
        ));
    }
    let bound = |b: usize| range.start + b * n / blocks;
    Ok((0..k)
        .map(|i| Fold {
            index: i,
            train: range.start..bound(i + 1),
            eval: bound(i + 1)..bound(i + 2),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub folds: Vec<Fold>,
    pub fold_maes: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation; zero for a single fold.
    pub std: f64,
}

impl CvResult {
    pub fn from_folds(folds: Vec<Fold>, fold_maes: Vec<f64>) -> Result<Self> {
        if folds.len() != fold_maes.len() || folds.is_empty() {
            return Err(Error::shape("cv_result", "one MAE per fold required"));
        }
        let n = fold_maes.len() as f64;
        let mean = fold_maes.iter().sum::<f64>() / n;
        let std = if fold_maes.len() > 1 {
            (fold_maes.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Ok(Self {
            folds,
            fold_maes,
            mean,
            std,
        })
    }
}

/// Scores `evaluate` on every fold, folds in parallel.
pub fn cross_validate<F>(range: Range<usize>, k: usize, min_block: usize, evaluate: F) -> Result<CvResult>
where
    F: Fn(&Fold) -> Result<f64> + Sync,
{
    cross_validate_with(range, k, min_block, |f| evaluate(f).map(|m| (m, ()))).map(|(r, _)| r)
}

/// [`cross_validate`] where each fold also returns some detail, kept in fold order.
pub fn cross_validate_with<T, F>(
    range: Range<usize>,
    k: usize,
    min_block: usize,
    evaluate: F,
) -> Result<(CvResult, Vec<T>)>
where
    T: Send,
    F: Fn(&Fold) -> Result<(f64, T)> + Sync,
{
    let folds = blocked_folds(range, k, min_block)?;
    let scored = folds
        .par_iter()
        .map(|f| evaluate(f).map_err(|e| Error::precondition("cross_validate", format!("fold {}: {e}", f.index))))
        .collect::<Result<Vec<(f64, T)>>>()?;
    let (maes, detail): (Vec<f64>, Vec<T>) = scored.into_iter().unzip();
    Ok((CvResult::from_folds(folds, maes)?, detail))
}
