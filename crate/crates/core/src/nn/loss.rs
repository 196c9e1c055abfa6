use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    #[default]
    Mse,
    Mae,
}

/// Loss value and its gradient with respect to `prediction`.
///
/// The MAE subgradient at a zero residual is 0.
pub fn loss(prediction: &Tensor, target: &Tensor, kind: LossKind) -> Result<(f64, Tensor)> {
    if prediction.shape() != target.shape() {
        return Err(Error::shape(
            "loss",
            format!("prediction {:?} vs target {:?}", prediction.shape(), target.shape()),
        ));
    }
    let n = prediction.len() as f64;
    let residuals = prediction.data().iter().zip(target.data()).map(|(p, t)| p - t);
    let (value, grad): (f64, Vec<f64>) = match kind {
        LossKind::Mse => residuals.fold((0.0, Vec::new()), |(s, mut g), r| {
            g.push(2.0 * r / n);
            (s + r * r, g)
        }),
        LossKind::Mae => residuals.fold((0.0, Vec::new()), |(s, mut g), r| {
            let sign = if r > 0.0 {
                1.0
            } else if r < 0.0 {
                -1.0
            } else {
                0.0
            };
            g.push(sign / n);
            (s + r.abs(), g)
        }),
    };
    Ok((value / n, Tensor::new(prediction.shape().to_vec(), grad)?))
}
