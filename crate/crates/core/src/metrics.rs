//! Scoring metrics shared by the harness and the baseline comparison.

use crate::error::{Error, Result};

/// Mean absolute error.
pub fn mae(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    check("mae", predictions, targets)?;
    let sum: f64 = predictions.iter().zip(targets).map(|(p, t)| (p - t).abs()).sum();
    Ok(sum / predictions.len() as f64)
}

/// Root mean squared error.
pub fn rmse(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    check("rmse", predictions, targets)?;
    let sum: f64 = predictions.iter().zip(targets).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok((sum / predictions.len() as f64).sqrt())
}

/// `100 · (baseline − candidate) / baseline`, in percent.
pub fn relative_improvement(baseline_mae: f64, candidate_mae: f64) -> Result<f64> {
    if !(baseline_mae > 0.0) {
        return Err(Error::precondition(
            "relative_improvement",
            format!("baseline MAE {baseline_mae} must be positive"),
        ));
    }
    Ok(100.0 * (baseline_mae - candidate_mae) / baseline_mae)
}

fn check(op: &'static str, a: &[f64], b: &[f64]) -> Result<()> {
    if a.is_empty() {
        return Err(Error::precondition(op, "empty input"));
    }
    if a.len() != b.len() {
        return Err(Error::shape(
            op,
            format!("{} predictions vs {} targets", a.len(), b.len()),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mae_cases() {
        assert_eq!(mae(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mae(&[1.0, 2.0], &[3.0, 2.0]).unwrap(), 1.0);
        assert!(mae(&[], &[]).is_err());
        assert!(mae(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn improvement_cases() {
        assert_eq!(relative_improvement(0.3, 0.3).unwrap(), 0.0);
        assert!(relative_improvement(0.0, 0.1).is_err());
        assert!(relative_improvement(-1.0, 0.1).is_err());
    }

    proptest! {
        #[test]
        fn mae_permutation_invariant(pairs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..20), rot in 0usize..20) {
            let (p, t): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
            let k = rot % p.len();
            let mut p2 = p.clone();
            let mut t2 = t.clone();
            p2.rotate_left(k);
            t2.rotate_left(k);
            prop_assert!((mae(&p, &t).unwrap() - mae(&p2, &t2).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn improvement_inverts(b in 0.01f64..10.0, pct in 0.0f64..99.99) {
            let c = b * (1.0 - pct / 100.0);
            prop_assert!((relative_improvement(b, c).unwrap() - pct).abs() < 1e-10);
        }
    }
}
