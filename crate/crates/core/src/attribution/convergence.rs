use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::methods::{attribute_batch, BatchOptions};
use super::{Method, MethodChoice};
use crate::error::{Error, Result};
use crate::network::Model;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Step counts of the convergence sweep, `1, 2, 4, ..., 256`.
pub const SWEEP_STEPS: [usize; 9] = [1, 2, 4, 8, 16, 32, 64, 128, 256];

/// Riemann steps of the fine reference Integrated Gradients.
pub const ORACLE_STEPS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePoint {
    pub steps: usize,
    /// Mean over inputs and features of `|IG@steps - IG@oracle|`.
    pub mean_abs_diff: f64,
}

/// Integrated Gradients at each step count, compared with `oracle_steps`.
pub fn ig_convergence<S: Scalar>(
    model: &dyn Model<S>,
    xs: &Tensor<S>,
    targets: &[usize],
    opts: &BatchOptions<S>,
    steps: &[usize],
    oracle_steps: usize,
) -> Result<Vec<ConvergencePoint>> {
    let ig = |s| attribute_batch(model, xs, targets, MethodChoice::new(Method::IntegratedGradients, s), opts);
    let oracle = ig(oracle_steps)?;
    steps
        .iter()
        .map(|&s| {
            let a = ig(s)?;
            let total: f64 = a
                .data()
                .iter()
                .zip(oracle.data())
                .map(|(p, q)| (*p - *q).abs().as_f64())
                .sum();
            Ok(ConvergencePoint {
                steps: s,
                mean_abs_diff: total / a.len().max(1) as f64,
            })
        })
        .collect()
}

/// Mean wall-clock time of one `attribute_batch` call over `calls` calls.
pub fn mean_call_time<S: Scalar>(
    model: &dyn Model<S>,
    xs: &Tensor<S>,
    targets: &[usize],
    choice: MethodChoice,
    opts: &BatchOptions<S>,
    calls: usize,
) -> Result<Duration> {
    if calls == 0 {
        return Err(Error::InvalidArgument("calls must be at least 1".into()));
    }
    let mut total = Duration::ZERO;
    for _ in 0..calls {
        let start = Instant::now();
        let a = attribute_batch(model, xs, targets, choice, opts)?;
        total += start.elapsed();
        std::hint::black_box(a);
    }
    Ok(total / calls as u32)
}
