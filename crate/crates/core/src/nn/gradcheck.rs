//! Central finite-difference check of a learner's analytic gradients.

use super::loss::LossKind;
use super::optim::Learner;
use crate::error::{Error, Result};

/// Worst disagreement between back-propagated and numerical gradients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheck {
    /// `‖g − ĝ‖ / max(‖g‖, ‖ĝ‖)` of the worst parameter tensor; 0 when both vanish.
    pub max_relative_error: f64,
    /// Index of that tensor in [`Learner::parameters_mut`] order.
    pub worst_parameter: usize,
    pub entries: usize,
}

/// Perturbs every entry of every parameter by `±h` and compares
/// `(L(θ + h) − L(θ − h)) / 2h` with the analytic gradient. Values are
/// restored exactly afterwards.
pub fn gradient_check<L: Learner>(
    learner: &mut L,
    example: &L::Example,
    kind: LossKind,
    h: f64,
) -> Result<GradientCheck> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::config(format!("finite-difference step {h} must be positive")));
    }
    let (_, analytic) = learner.example_gradients(example, kind)?;
    let count = learner.parameters_mut().len();
    if analytic.len() != count {
        return Err(Error::shape(
            "gradient_check",
            format!("{} gradients for {count} parameters", analytic.len()),
        ));
    }
    let mut worst = (0.0, 0);
    let mut entries = 0;
    for (p, grad) in analytic.iter().enumerate() {
        let mut diff = 0.0;
        let mut norm_a = 0.0;
        let mut norm_n = 0.0;
        for j in 0..grad.len() {
            let original = learner.parameters_mut()[p].value.data()[j];
            let mut loss_at = |v: f64| -> Result<f64> {
                learner.parameters_mut()[p].value.data_mut()[j] = v;
                Ok(learner.example_gradients(example, kind)?.0)
            };
            let plus = loss_at(original + h);
            let minus = loss_at(original - h);
            learner.parameters_mut()[p].value.data_mut()[j] = original;
            let numeric = (plus? - minus?) / (2.0 * h);
            let a = grad.data()[j];
            diff += (a - numeric).powi(2);
            norm_a += a * a;
            norm_n += numeric * numeric;
        }
        entries += grad.len();
        let scale = norm_a.sqrt().max(norm_n.sqrt());
        let rel = if scale > 0.0 { diff.sqrt() / scale } else { 0.0 };
        if rel > worst.0 {
            worst = (rel, p);
        }
    }
    Ok(GradientCheck {
        max_relative_error: worst.0,
        worst_parameter: worst.1,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{LayerSpec, Network};
    use crate::tensor::Tensor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dense_gradients_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = Network::build(&[3], &[LayerSpec::Dense { units: 2 }], &mut rng).unwrap();
        let ex = (Tensor::vector(vec![0.5, -1.0, 2.0]), Tensor::vector(vec![1.0, 0.0]));
        let before = net.clone();
        let c = gradient_check(&mut net, &ex, LossKind::Mse, 1e-5).unwrap();
        assert!(c.max_relative_error < 1e-8, "{c:?}");
        assert_eq!(c.entries, 8);
        assert_eq!(net, before);
    }

    #[test]
    fn nonpositive_step_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = Network::build(&[1], &[LayerSpec::Dense { units: 1 }], &mut rng).unwrap();
        let ex = (Tensor::vector(vec![1.0]), Tensor::vector(vec![1.0]));
        assert!(gradient_check(&mut net, &ex, LossKind::Mse, 0.0).is_err());
    }
}
