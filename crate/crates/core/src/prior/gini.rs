use crate::autodiff::Var;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Denominator guard of the Gini prior.
pub const GINI_EPS: f64 = 1e-8;

/// Sparsity prior over a `[m, n]` batch of signed attributions.
///
/// With `A` the column mean over the batch,
/// `Omega = -sum_ij |A_i - A_j| / (m * sign(S) * (|S| + eps))`, `S = sum_i A_i`.
/// Minimizing it spreads the mean attribution unevenly across features.
pub fn gini_prior<'t, S: Scalar>(batch: Var<'t, S>) -> Result<Var<'t, S>> {
    let shape = batch.shape();
    if shape.len() != 2 || shape[0] == 0 || shape[1] < 2 {
        return Err(Error::InvalidArgument(format!(
            "gini prior needs a [m >= 1, n >= 2] batch, got {shape:?}"
        )));
    }
    let (m, n) = (shape[0], shape[1]);
    let tape = batch.tape();
    let mean = tape
        .constant(Tensor::filled(&[1, m], S::one() / S::of(m as f64)))
        .matmul(batch)?;
    let ones_row = tape.constant(Tensor::ones(&[1, n]));
    let ones_col = tape.constant(Tensor::ones(&[n, 1]));
    // [n, n] with entry (i, j) = A_i and A_j respectively
    let by_row = mean.matmul_t(ones_row, true, false)?;
    let by_col = ones_col.matmul(mean)?;
    let spread = by_row.sub(by_col)?.abs().sum();

    let total = mean.sum();
    let guard = if total.item() >= S::zero() { GINI_EPS } else { -GINI_EPS };
    let denom = total.add_scalar(S::of(guard));
    Ok(spread.div(denom)?.scale(-S::one() / S::of(m as f64)))
}

/// Plain Gini coefficient of nonnegative values, in `[0, 1)`.
pub fn gini_coefficient(values: &[f64]) -> f64 {
    let n = values.len();
    let total: f64 = values.iter().sum();
    if n == 0 || total == 0.0 {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    // sum_ij |x_i - x_j| = 2 sum_k (2k - n + 1) x_(k) for sorted x
    let pairs: f64 = sorted
        .iter()
        .enumerate()
        .map(|(k, x)| (2.0 * k as f64 - n as f64 + 1.0) * x)
        .sum();
    pairs / (n as f64 * total)
}
