//! Sliding windows over aligned daily rows.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// A `window_size × n_features` slice starting at day `start`.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalWindow {
    pub start: usize,
    pub values: Tensor,
}

impl TemporalWindow {
    pub fn len(&self) -> usize {
        self.values.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Index of the last day covered.
    pub fn end(&self) -> usize {
        self.start + self.len() - 1
    }
}

/// A window together with the state of the day right after it.
#[derive(Debug, Clone, PartialEq)]
pub struct SupervisedPair {
    pub window: TemporalWindow,
    pub target_day: usize,
    pub target: Vec<f64>,
}

fn window_at<R: AsRef<[f64]>>(rows: &[R], start: usize, size: usize) -> Result<TemporalWindow> {
    let width = rows[0].as_ref().len();
    let mut data = Vec::with_capacity(size * width);
    for r in &rows[start..start + size] {
        let r = r.as_ref();
        if r.len() != width {
            return Err(Error::shape("window_sequences", "ragged feature rows"));
        }
        data.extend_from_slice(r);
    }
    Ok(TemporalWindow {
        start,
        values: Tensor::new(vec![size, width], data)?,
    })
}

fn check_len(n: usize, size: usize) -> Result<()> {
    if size == 0 {
        return Err(Error::config("window size must be ≥ 1"));
    }
    if n < size {
        return Err(Error::precondition(
            "window_sequences",
            format!("series of {n} days is shorter than window size {size}"),
        ));
    }
    Ok(())
}

/// All `N − W + 1` windows, each advancing by one day.
pub fn sliding_windows<R: AsRef<[f64]>>(rows: &[R], size: usize) -> Result<Vec<TemporalWindow>> {
    check_len(rows.len(), size)?;
    (0..=rows.len() - size).map(|s| window_at(rows, s, size)).collect()
}

/// The `N − W` windows that have a next-day target.
pub fn window_sequences<R: AsRef<[f64]>, T: AsRef<[f64]>>(
    features: &[R],
    targets: &[T],
    size: usize,
) -> Result<Vec<SupervisedPair>> {
    if features.len() != targets.len() {
        return Err(Error::shape(
            "window_sequences",
            format!("{} feature rows vs {} target rows", features.len(), targets.len()),
        ));
    }
    check_len(features.len(), size)?;
    (0..features.len() - size)
        .map(|s| {
            Ok(SupervisedPair {
                window: window_at(features, s, size)?,
                target_day: s + size,
                target: targets[s + size].as_ref().to_vec(),
            })
        })
        .collect()
}

/// Fixed-size batches of consecutive items; the last batch may be short.
pub fn batches<T>(items: &[T], batch_size: usize) -> impl Iterator<Item = &[T]> {
    items.chunks(batch_size.max(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rows(n: usize) -> Vec<Vec<f64>> {
        (0..n).map(|i| vec![i as f64, 10.0 * i as f64]).collect()
    }

    #[test]
    fn batch_of_sixteen_windows_of_five() {
        let series = rows(40);
        let windows = sliding_windows(&series, 5).unwrap();
        let first = batches(&windows, 16).next().unwrap();
        assert_eq!(first.len(), 16);
        for (k, w) in first.iter().enumerate() {
            assert_eq!(w.len(), 5);
            assert_eq!(w.start, k);
        }
    }

    #[test]
    fn n_equal_w_gives_one_window() {
        assert_eq!(sliding_windows(&rows(7), 7).unwrap().len(), 1);
    }

    #[test]
    fn next_day_targets() {
        let series = rows(10);
        let pairs = window_sequences(&series, &series, 7).unwrap();
        assert_eq!(pairs.len(), 3);
        assert_eq!(pairs[2].window.end(), 8);
        assert_eq!(pairs[2].target, series[9]);
    }

    #[test]
    fn too_short_is_error() {
        assert!(sliding_windows(&rows(4), 5).is_err());
    }

    proptest! {
        #[test]
        fn pair_count_is_n_minus_w(n in 1usize..60, w in 1usize..20) {
            prop_assume!(n >= w);
            let series = rows(n);
            prop_assert_eq!(window_sequences(&series, &series, w).unwrap().len(), n - w);
            prop_assert_eq!(sliding_windows(&series, w).unwrap().len(), n - w + 1);
        }
    }
}
