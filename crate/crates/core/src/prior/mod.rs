//! Training with attribution priors.

mod auc;
mod experiment;
mod gini;
mod train;

#[cfg(test)]
mod tests;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::Homogeneity;

pub use auc::roc_auc;
pub use experiment::{
    subsample_experiment, ConfigSummary, ExperimentArm, ExperimentRow, ExperimentSummary,
    SparsityBench, UNREGULARIZED_BIASED, UNREGULARIZED_BIAS_FREE,
};
pub use gini::{gini_coefficient, gini_prior, GINI_EPS};
pub use train::{batch_objective, train, EpochRecord, Objective, StepRecord, TrainOutcome};

/// Attribution method used inside the prior.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum PriorMethod {
    Grad,
    /// Gradient of the log predicted probability of the target class.
    Rrr,
    /// Expected Gradients with `references` draws per sample.
    Eg { references: usize },
    Xg,
}

impl fmt::Display for PriorMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PriorMethod::Grad => f.write_str("grad"),
            PriorMethod::Rrr => f.write_str("rrr"),
            PriorMethod::Eg { references } => write!(f, "eg{references}"),
            PriorMethod::Xg => f.write_str("xg"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PriorKind {
    /// Gini prior over per-sample attribution magnitudes, or over the signed
    /// attributions when `signed` is set. With signed attributions a batch
    /// whose mean attribution sums below zero flips the sign of the prior.
    SparsityGini {
        #[serde(default)]
        signed: bool,
    },
    /// Penalizes the squared attribution of the listed features.
    ZeroAttributionMask { features: Vec<usize> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    pub method: PriorMethod,
    pub kind: PriorKind,
    pub lambda: f64,
}

/// Regularization strengths searched over.
pub const LAMBDA_GRID: [f64; 5] = [0.01, 0.1, 1.0, 10.0, 100.0];

impl PriorConfig {
    pub fn gini(method: PriorMethod, lambda: f64) -> Self {
        Self {
            method,
            kind: PriorKind::SparsityGini { signed: false },
            lambda,
        }
    }

    pub fn validate(&self, homogeneity: &Homogeneity, n_features: usize) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "lambda must be a nonnegative number, got {}",
                self.lambda
            )));
        }
        if let PriorMethod::Eg { references: 0 } = self.method {
            return Err(Error::EmptyReferences);
        }
        if self.method == PriorMethod::Xg {
            if let Homogeneity::NonHomogeneous(reasons) = homogeneity {
                return Err(Error::NotHomogeneous(reasons.clone()));
            }
        }
        if let PriorKind::ZeroAttributionMask { features } = &self.kind {
            if let Some(f) = features.iter().find(|&&f| f >= n_features) {
                return Err(Error::InvalidArgument(format!(
                    "masked feature {f} out of range for {n_features} features"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub const fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Loss {
    /// One output logit per sample, labels in {0, 1}.
    BinaryCrossEntropy,
    SoftmaxCrossEntropy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub seed: u64,
    pub loss: Loss,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 32,
            learning_rate: 1e-3,
            optimizer: Optimizer::adam(),
            seed: 0,
            loss: Loss::BinaryCrossEntropy,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if let Optimizer::Adam { beta1, beta2, eps } = self.optimizer {
            if !((0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2) && eps > 0.0) {
                return Err(Error::InvalidArgument("invalid Adam hyperparameters".into()));
            }
        }
        Ok(())
    }
}
