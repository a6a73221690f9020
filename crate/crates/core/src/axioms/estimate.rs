use rand::seq::SliceRandom;
use rand::Rng;

use crate::attribution::{attribute_batch, expected_gradient_draws, BatchOptions, Method, MethodChoice};
use crate::error::{Error, Result};
use crate::network::Model;
use crate::rng::Rng as StdRng;
use crate::tensor::Tensor;

/// An attribution vector. Sampling estimators also keep their per-draw
/// terms (`k` rows of `n`) so standard errors can be formed for any linear
/// functional of the attribution.
#[derive(Clone, Debug)]
pub(crate) struct Estimate {
    pub value: Vec<f64>,
    draws: Vec<f64>,
    k: usize,
}

impl Estimate {
    /// Standard error of `sum_i w_i a_i`; zero for deterministic methods and
    /// for single draws, where no spread can be observed.
    pub fn se_of(&self, w: &[f64]) -> f64 {
        if self.k < 2 {
            return 0.0;
        }
        let n = self.value.len();
        let sums: Vec<f64> = self
            .draws
            .chunks(n)
            .map(|row| row.iter().zip(w).map(|(d, w)| d * w).sum())
            .collect();
        let k = self.k as f64;
        let mean = sums.iter().sum::<f64>() / k;
        (sums.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (k - 1.0) / k).sqrt()
    }

    pub fn se_at(&self, i: usize) -> f64 {
        if self.k < 2 {
            return 0.0;
        }
        let mut w = vec![0.0; self.value.len()];
        w[i] = 1.0;
        self.se_of(&w)
    }

    pub fn total(&self) -> f64 {
        self.value.iter().sum()
    }
}

/// Attribution of output 0 at `x`. Expected Gradients samples references
/// from `background` and positions from `rng`; the path methods use the zero
/// baseline and ignore both.
pub(crate) fn estimate(
    model: &dyn Model<f64>,
    choice: MethodChoice,
    x: &[f64],
    background: &[Vec<f64>],
    rng: &mut StdRng,
) -> Result<Estimate> {
    let n = x.len();
    if choice.method != Method::ExpectedGradients {
        let xs = Tensor::new(&[1, n], x.to_vec())?;
        let a = attribute_batch(model, &xs, &[0], choice, &BatchOptions::default())?;
        return Ok(Estimate {
            value: a.into_data(),
            draws: Vec::new(),
            k: 0,
        });
    }
    let k = choice.steps;
    if k == 0 || background.is_empty() {
        return Err(Error::EmptyReferences);
    }
    let mut refs = Vec::with_capacity(k * n);
    let mut alphas = Vec::with_capacity(k);
    for _ in 0..k {
        refs.extend_from_slice(background.choose(rng).expect("non-empty background"));
        alphas.push(rng.gen::<f64>());
    }
    let draws = expected_gradient_draws(
        model,
        &Tensor::vector(x.to_vec()),
        0,
        &Tensor::new(&[k, n], refs)?,
        &alphas,
    )?
    .into_data();
    let value = (0..n)
        .map(|i| (0..k).map(|j| draws[j * n + i]).sum::<f64>() / k as f64)
        .collect();
    Ok(Estimate { value, draws, k })
}
