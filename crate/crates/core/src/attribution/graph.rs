//! Attributions as recorded graphs.
//!
//! Every gradient-based method in the crate is computed here, whether it is
//! called standalone or from inside a training objective that differentiates
//! through it.

use std::sync::Arc;

use crate::autodiff::{Order, Tape, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Which attribution to build, for a batch of `m` inputs.
pub enum GraphMethod<'r, S: Scalar> {
    Gradient,
    InputXGradient,
    /// Same arithmetic as `InputXGradient`; callers check homogeneity first.
    XGradient,
    /// Gradient of `log(F)`, or of `log(F + eps)` when `eps` is set.
    LogGradient { eps: Option<S> },
    /// One reference row and one interpolation position per draw; draws for
    /// input `r` occupy rows `r * k .. (r + 1) * k`.
    ExpectedGradients {
        references: &'r Tensor<S>,
        alphas: &'r [S],
        k: usize,
    },
}

/// `logits[r, targets[r]]` for every row.
pub fn select_targets<'t, S: Scalar>(
    logits: Var<'t, S>,
    targets: &[usize],
) -> Result<Var<'t, S>> {
    let shape = logits.shape();
    let (m, outputs) = (shape[0], shape[1]);
    if targets.len() != m {
        return Err(Error::InvalidArgument(format!(
            "{} targets for {} rows",
            targets.len(),
            m
        )));
    }
    if let Some(&bad) = targets.iter().find(|&&t| t >= outputs) {
        return Err(Error::InvalidTarget {
            target: bad,
            outputs,
        });
    }
    let idx: Arc<[usize]> = targets
        .iter()
        .enumerate()
        .map(|(r, &t)| r * outputs + t)
        .collect();
    logits.gather(idx, &[m])
}

/// Builds the `[m, n]` attribution of `x` on `tape`.
///
/// `forward` maps a `[rows, n]` input to `[rows, outputs]` logits. With
/// [`Order::Second`] the result stays differentiable with respect to
/// whatever parameters `forward` closes over.
pub fn attribution_graph<'t, S, F>(
    tape: &'t Tape<S>,
    forward: F,
    x: &Tensor<S>,
    targets: &[usize],
    method: &GraphMethod<'_, S>,
    order: Order,
) -> Result<Var<'t, S>>
where
    S: Scalar,
    F: Fn(Var<'t, S>) -> Result<Var<'t, S>>,
{
    if x.rank() != 2 {
        return Err(Error::InvalidArgument(format!(
            "expected a [batch, features] input, got {:?}",
            x.shape()
        )));
    }
    match method {
        GraphMethod::Gradient => input_gradient(tape, &forward, x, targets, order),
        GraphMethod::InputXGradient | GraphMethod::XGradient => {
            let g = input_gradient(tape, &forward, x, targets, order)?;
            g.mul(tape.constant(x.clone()))
        }
        GraphMethod::LogGradient { eps } => {
            let xv = tape.var(x.clone());
            let f = select_targets(forward(xv)?, targets)?;
            let inner = match eps {
                None => f,
                Some(eps) => f.add_scalar(*eps),
            };
            if let Some(&bad) = inner.value().data().iter().find(|v| **v <= S::zero()) {
                return Err(Error::NonPositiveLogit(bad.as_f64()));
            }
            let s = inner.ln().sum();
            Ok(tape.gradient(s, &[xv], order)?[0])
        }
        GraphMethod::ExpectedGradients {
            references,
            alphas,
            k,
        } => {
            let terms = expected_gradient_terms(tape, &forward, x, targets, references, alphas, *k, order)?;
            let m = x.shape()[0];
            let mut avg = Tensor::zeros(&[m, m * k]);
            let w = S::one() / S::of(*k as f64);
            for r in 0..m {
                for j in 0..*k {
                    avg.data_mut()[r * m * k + r * k + j] = w;
                }
            }
            tape.constant(avg).matmul(terms)
        }
    }
}

fn input_gradient<'t, S, F>(
    tape: &'t Tape<S>,
    forward: &F,
    x: &Tensor<S>,
    targets: &[usize],
    order: Order,
) -> Result<Var<'t, S>>
where
    S: Scalar,
    F: Fn(Var<'t, S>) -> Result<Var<'t, S>>,
{
    let xv = tape.var(x.clone());
    let s = select_targets(forward(xv)?, targets)?.sum();
    Ok(tape.gradient(s, &[xv], order)?[0])
}

/// Per-draw expected-gradient terms `(x - r) * dF/dx (r + alpha (x - r))`,
/// one row per draw (`[m * k, n]`).
#[allow(clippy::too_many_arguments)]
pub(crate) fn expected_gradient_terms<'t, S, F>(
    tape: &'t Tape<S>,
    forward: &F,
    x: &Tensor<S>,
    targets: &[usize],
    references: &Tensor<S>,
    alphas: &[S],
    k: usize,
    order: Order,
) -> Result<Var<'t, S>>
where
    S: Scalar,
    F: Fn(Var<'t, S>) -> Result<Var<'t, S>>,
{
    let (m, n) = (x.shape()[0], x.shape()[1]);
    if k == 0 {
        return Err(Error::EmptyReferences);
    }
    if references.shape() != [m * k, n] || alphas.len() != m * k {
        return Err(Error::InvalidArgument(format!(
            "expected {} reference rows of width {} and as many alphas, got {:?} and {}",
            m * k,
            n,
            references.shape(),
            alphas.len()
        )));
    }
    let mut diff = Tensor::zeros(&[m * k, n]);
    let mut points = Tensor::zeros(&[m * k, n]);
    for r in 0..m {
        for j in 0..k {
            let row = r * k + j;
            let a = alphas[row];
            for i in 0..n {
                let xi = x.data()[r * n + i];
                let ri = references.data()[row * n + i];
                diff.data_mut()[row * n + i] = xi - ri;
                points.data_mut()[row * n + i] = ri + a * (xi - ri);
            }
        }
    }
    let repeated: Vec<usize> = targets.iter().flat_map(|&t| std::iter::repeat_n(t, k)).collect();
    let pv = tape.var(points);
    let s = select_targets(forward(pv)?, &repeated)?.sum();
    let g = tape.gradient(s, &[pv], order)?[0];
    g.mul(tape.constant(diff))
}
