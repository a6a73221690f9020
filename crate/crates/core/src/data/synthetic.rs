use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Dataset, Provenance};
use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// How feature values are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Encoding {
    /// Informative columns are unit-variance Gaussians with class means at
    /// `±shift`; nuisance blocks share a Gaussian factor with correlation
    /// `block_correlation`.
    Gaussian,
    /// Informative columns are indicators firing with probability
    /// `0.5 ± shift / 2` depending on the class; each nuisance block is one
    /// uniformly drawn categorical variable in one-hot form.
    OneHot,
}

/// Binary-label tabular data with a few informative columns
/// `0..n_informative`, followed by label-independent nuisance columns
/// grouped in consecutive blocks of `block_size`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSpec {
    pub n_samples: usize,
    pub n_features: usize,
    pub n_informative: usize,
    pub encoding: Encoding,
    pub shift: f64,
    pub block_size: usize,
    /// Correlation between two columns of the same nuisance block.
    pub block_correlation: f64,
    /// Probability of label 1.
    pub positive_rate: f64,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        Self {
            n_samples: 13_000,
            n_features: 118,
            n_informative: 10,
            encoding: Encoding::Gaussian,
            shift: 0.35,
            block_size: 8,
            block_correlation: 0.6,
            positive_rate: 0.5,
        }
    }
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n_features == 0 || self.n_samples == 0 {
            return bad("n_features and n_samples must be positive".into());
        }
        if self.n_informative > self.n_features {
            return bad(format!(
                "n_informative {} exceeds n_features {}",
                self.n_informative, self.n_features
            ));
        }
        if self.block_size == 0 {
            return bad("block_size must be positive".into());
        }
        if !(0.0..1.0).contains(&self.block_correlation) {
            return bad(format!("block_correlation {} not in [0, 1)", self.block_correlation));
        }
        if !(self.positive_rate > 0.0 && self.positive_rate < 1.0) {
            return bad(format!("positive_rate {} not in (0, 1)", self.positive_rate));
        }
        if !self.shift.is_finite() {
            return bad("shift must be finite".into());
        }
        if self.encoding == Encoding::OneHot && !(0.0..=1.0).contains(&self.shift) {
            return bad(format!("one-hot shift {} not in [0, 1]", self.shift));
        }
        Ok(())
    }
}

pub fn generate_synthetic<S: Scalar>(spec: &GeneratorSpec, seed: u64) -> Result<Dataset<S>> {
    spec.validate()?;
    let mut rng = rng::stream(seed, &[rng::tag("synthetic-data")]);
    let n = spec.n_features;
    let k = spec.n_informative;
    let rho = spec.block_correlation;
    let (shared, own) = (rho.sqrt(), (1.0 - rho).sqrt());

    let mut data = Vec::with_capacity(spec.n_samples * n);
    let mut labels = Vec::with_capacity(spec.n_samples);
    let mut factors = vec![0.0f64; (n - k).div_ceil(spec.block_size)];
    for _ in 0..spec.n_samples {
        let y = usize::from(rng.gen::<f64>() < spec.positive_rate);
        let sign = if y == 1 { 1.0 } else { -1.0 };
        match spec.encoding {
            Encoding::Gaussian => {
                for f in factors.iter_mut() {
                    *f = rng.sample(StandardNormal);
                }
                for j in 0..n {
                    let noise: f64 = rng.sample(StandardNormal);
                    let v = if j < k {
                        sign * spec.shift + noise
                    } else {
                        shared * factors[(j - k) / spec.block_size] + own * noise
                    };
                    data.push(S::of(v));
                }
            }
            Encoding::OneHot => {
                let p = 0.5 + sign * spec.shift / 2.0;
                for _ in 0..k {
                    data.push(if rng.gen::<f64>() < p { S::one() } else { S::zero() });
                }
                let start = data.len();
                data.resize(start + n - k, S::zero());
                for (b, block) in (k..n).step_by(spec.block_size).enumerate() {
                    let width = spec.block_size.min(n - block);
                    let hot = b * spec.block_size + rng.gen_range(0..width);
                    data[start + hot] = S::one();
                }
            }
        }
        labels.push(y);
    }
    let names = (0..n)
        .map(|j| if j < k { format!("signal_{j}") } else { format!("nuisance_{}", j - k) })
        .collect();
    Dataset::new(
        Tensor::new(&[spec.n_samples, n], data)?,
        labels,
        names,
        Provenance::Generator {
            spec: spec.clone(),
            seed,
        },
    )
}
