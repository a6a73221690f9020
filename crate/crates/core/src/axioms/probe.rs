use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{batch_logits, predicted_classes};
use crate::network::Model;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContrastPoint {
    pub alpha: f64,
    pub accuracy: f64,
}

/// Classification accuracy on `alpha * x` for each `alpha`.
///
/// A homogeneous network scales every logit by `alpha`, so its predicted
/// classes and accuracy do not change.
pub fn contrast_equivariance_probe<S: Scalar>(
    model: &dyn Model<S>,
    data: &Dataset<S>,
    alphas: &[f64],
) -> Result<Vec<ContrastPoint>> {
    if let Some(a) = alphas.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
        return Err(Error::InvalidArgument(format!("contrast factor {a} must be positive")));
    }
    if data.is_empty() {
        return Err(Error::InvalidArgument("empty dataset".into()));
    }
    alphas
        .iter()
        .map(|&alpha| {
            let scaled = data.features().scale(S::of(alpha));
            let predicted = predicted_classes(&batch_logits(model, &scaled)?);
            let hits = predicted.iter().zip(data.labels()).filter(|(p, l)| p == l).count();
            Ok(ContrastPoint {
                alpha,
                accuracy: hits as f64 / data.len() as f64,
            })
        })
        .collect()
}
