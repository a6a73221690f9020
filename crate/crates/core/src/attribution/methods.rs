use rand::seq::SliceRandom;
use rand::Rng as _;

use super::graph::{attribution_graph, GraphMethod};
use super::{Attribution, Baseline, Method, MethodChoice};
use crate::autodiff::{Order, Tape};
use crate::error::{Error, Result};
use crate::network::Model;
use crate::rng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Riemann steps used for "converged" Integrated Gradients.
pub const DEFAULT_STEPS: usize = 128;

/// Offset used by the stabilized log-gradient.
pub const RRR_EPS: f64 = 1e-6;

/// Largest number of interpolation rows recorded on one tape.
const CHUNK_ROWS: usize = 256;

const PROBE_ALPHAS: [f64; 8] = [0.1, 0.25, 0.5, 0.8, 1.3, 2.0, 3.7, 6.0];
const PROBE_TOL: f64 = 1e-6;

fn as_row<S: Scalar>(model: &dyn Model<S>, x: &Tensor<S>) -> Result<Tensor<S>> {
    let n = model.input_dim();
    if x.shape() != [n] {
        return Err(Error::InvalidArgument(format!(
            "input shape {:?} does not match model input dim {n}",
            x.shape()
        )));
    }
    x.reshape(&[1, n])
}

fn check_batch<S: Scalar>(model: &dyn Model<S>, xs: &Tensor<S>, targets: &[usize]) -> Result<()> {
    if xs.rank() != 2 || xs.shape()[1] != model.input_dim() {
        return Err(Error::InvalidArgument(format!(
            "batch shape {:?} does not match model input dim {}",
            xs.shape(),
            model.input_dim()
        )));
    }
    if targets.len() != xs.shape()[0] {
        return Err(Error::InvalidArgument(format!(
            "{} targets for {} inputs",
            targets.len(),
            xs.shape()[0]
        )));
    }
    Ok(())
}

fn first_order<S: Scalar>(
    model: &dyn Model<S>,
    xs: &Tensor<S>,
    targets: &[usize],
    method: &GraphMethod<'_, S>,
) -> Result<Tensor<S>> {
    let tape = Tape::new();
    let a = attribution_graph(&tape, |v| model.logits(&tape, v), xs, targets, method, Order::First)?;
    let out = a.value().as_ref().clone();
    Ok(out)
}

fn single<S: Scalar>(
    model: &dyn Model<S>,
    x: &Tensor<S>,
    target: usize,
    method: &GraphMethod<'_, S>,
) -> Result<Tensor<S>> {
    let row = as_row(model, x)?;
    first_order(model, &row, &[target], method)?.reshape(x.shape())
}

fn plain<S: Scalar>(values: Tensor<S>, method: Method, target: usize) -> Attribution<S> {
    Attribution {
        values,
        method,
        baseline: Baseline::Zero,
        target,
        steps: 0,
    }
}

pub fn grad_attr<S: Scalar>(model: &dyn Model<S>, x: &Tensor<S>, target: usize) -> Result<Attribution<S>> {
    let a = single(model, x, target, &GraphMethod::Gradient)?;
    Ok(plain(a, Method::Gradient, target))
}

pub fn input_x_grad<S: Scalar>(
    model: &dyn Model<S>,
    x: &Tensor<S>,
    target: usize,
) -> Result<Attribution<S>> {
    let a = single(model, x, target, &GraphMethod::InputXGradient)?;
    Ok(plain(a, Method::InputXGradient, target))
}

/// `x * dF/dx` relative to the zero baseline; refuses non-homogeneous models.
pub fn x_gradient<S: Scalar>(model: &dyn Model<S>, x: &Tensor<S>, target: usize) -> Result<Attribution<S>> {
    require_homogeneous(model)?;
    let a = single(model, x, target, &GraphMethod::XGradient)?;
    Ok(plain(a, Method::XGradient, target))
}

fn require_homogeneous<S: Scalar>(model: &dyn Model<S>) -> Result<()> {
    match model.homogeneity() {
        crate::network::Homogeneity::Homogeneous => Ok(()),
        crate::network::Homogeneity::NonHomogeneous(reasons) => Err(Error::NotHomogeneous(reasons)),
    }
}

/// `(1/k) x * dF/dx` for a model that is positively homogeneous of degree `k`.
///
/// The degree is checked on the target logit at a fixed set of scales before
/// anything is computed.
pub fn closed_form_ig_degree_k<S: Scalar>(
    model: &dyn Model<S>,
    x: &Tensor<S>,
    target: usize,
    k: f64,
) -> Result<Attribution<S>> {
    if !(k >= 1.0 && k.is_finite()) {
        return Err(Error::InvalidArgument(format!("degree must be >= 1, got {k}")));
    }
    let row = as_row(model, x)?;
    let logit = |input: &Tensor<S>| -> Result<f64> {
        let tape = Tape::new();
        let y = tape.no_grad(|| model.logits(&tape, tape.constant(input.clone())))?;
        let y = super::select_targets(y, &[target])?;
        Ok(y.value().data()[0].as_f64())
    };
    let fx = logit(&row)?;
    for alpha in PROBE_ALPHAS {
        let expected = alpha.powf(k) * fx;
        let got = logit(&row.scale(S::of(alpha)))?;
        let scale = expected.abs().max(got.abs());
        let error = if scale == 0.0 { 0.0 } else { (got - expected).abs() / scale };
        if !(error <= PROBE_TOL) {
            return Err(Error::HomogeneityProbeFailed { degree: k, alpha, error });
        }
    }
    let a = first_order(model, &row, &[target], &GraphMethod::InputXGradient)?
        .scale(S::of(1.0 / k))
        .reshape(x.shape())?;
    Ok(Attribution {
        values: a,
        method: Method::ClosedFormIg,
        baseline: Baseline::Zero,
        target,
        steps: 0,
    })
}

/// Input gradients of the target logits at every row of `points`.
fn gradients_at<S: Scalar>(model: &dyn Model<S>, points: &Tensor<S>, targets: &[usize]) -> Result<Tensor<S>> {
    let (rows, n) = (points.shape()[0], points.shape()[1]);
    let mut out = Vec::with_capacity(rows * n);
    let mut start = 0;
    while start < rows {
        let end = (start + CHUNK_ROWS).min(rows);
        let chunk = Tensor::from_parts(vec![end - start, n], points.data()[start * n..end * n].to_vec());
        let g = first_order(model, &chunk, &targets[start..end], &GraphMethod::Gradient)?;
        out.extend_from_slice(g.data());
        start = end;
    }
    Ok(Tensor::from_parts(vec![rows, n], out))
}

/// Integrated Gradients along the straight line from `baseline` to `x`,
/// using the midpoint rule with `steps` intervals.
pub fn integrated_gradients<S: Scalar>(
    model: &dyn Model<S>,
    x: &Tensor<S>,
    baseline: &Baseline<S>,
    target: usize,
    steps: usize,
) -> Result<Attribution<S>> {
    let row = as_row(model, x)?;
    let base = baseline.to_tensor(x.len());
    if base.shape() != x.shape() {
        return Err(Error::InvalidArgument(format!(
            "baseline shape {:?} does not match input {:?}",
            base.shape(),
            x.shape()
        )));
    }
    let base = base.reshape(row.shape())?;
    let a = ig_rows(model, &row, &base, &[target], steps)?.reshape(x.shape())?;
    Ok(Attribution {
        values: a,
        method: Method::IntegratedGradients,
        baseline: baseline.clone(),
        target,
        steps,
    })
}

/// Row-wise IG for a batch; `baselines` has the same shape as `xs`.
fn ig_rows<S: Scalar>(
    model: &dyn Model<S>,
    xs: &Tensor<S>,
    baselines: &Tensor<S>,
    targets: &[usize],
    steps: usize,
) -> Result<Tensor<S>> {
    if steps == 0 {
        return Err(Error::InvalidArgument("steps must be at least 1".into()));
    }
    let (m, n) = (xs.shape()[0], xs.shape()[1]);
    let mut out = vec![S::zero(); m * n];
    // Walk the path in step blocks so memory stays bounded for large `steps`.
    let block = (CHUNK_ROWS / m.max(1)).clamp(1, steps);
    let mut s0 = 0;
    while s0 < steps {
        let s1 = (s0 + block).min(steps);
        let mut points = Vec::with_capacity((s1 - s0) * m * n);
        let mut rows_targets = Vec::with_capacity((s1 - s0) * m);
        for r in 0..m {
            for s in s0..s1 {
                let t = S::of((s as f64 + 0.5) / steps as f64);
                for i in 0..n {
                    let (xi, bi) = (xs.data()[r * n + i], baselines.data()[r * n + i]);
                    points.push(bi + t * (xi - bi));
                }
                rows_targets.push(targets[r]);
            }
        }
        let pts = Tensor::from_parts(vec![(s1 - s0) * m, n], points);
        let g = gradients_at(model, &pts, &rows_targets)?;
        let per = s1 - s0;
        for r in 0..m {
            for s in 0..per {
                let row = &g.data()[(r * per + s) * n..(r * per + s + 1) * n];
                for i in 0..n {
                    out[r * n + i] = out[r * n + i] + row[i];
                }
            }
        }
        s0 = s1;
    }
    let inv = S::one() / S::of(steps as f64);
    for r in 0..m {
        for i in 0..n {
            let d = xs.data()[r * n + i] - baselines.data()[r * n + i];
            out[r * n + i] = out[r * n + i] * inv * d;
        }
    }
    Ok(Tensor::from_parts(vec![m, n], out))
}

/// Expected Gradients over an explicit reference set, one uniform
/// interpolation position per reference drawn from `seed`.
pub fn expected_gradients<S: Scalar>(
    model: &dyn Model<S>,
    x: &Tensor<S>,
    target: usize,
    references: &[Tensor<S>],
    seed: u64,
) -> Result<Attribution<S>> {
    let mut rng = rng::stream(seed, &[rng::tag("expected-gradients")]);
    let alphas: Vec<f64> = references.iter().map(|_| rng.gen::<f64>()).collect();
    expected_gradients_with_alphas(model, x, target, references, &alphas)
}

/// Expected Gradients with caller-chosen interpolation positions.
pub fn expected_gradients_with_alphas<S: Scalar>(
    model: &dyn Model<S>,
    x: &Tensor<S>,
    target: usize,
    references: &[Tensor<S>],
    alphas: &[f64],
) -> Result<Attribution<S>> {
    if references.is_empty() {
        return Err(Error::EmptyReferences);
    }
    if alphas.len() != references.len() {
        return Err(Error::InvalidArgument(format!(
            "{} alphas for {} references",
            alphas.len(),
            references.len()
        )));
    }
    let row = as_row(model, x)?;
    for r in references {
        if r.shape() != x.shape() {
            return Err(Error::InvalidArgument(format!(
                "reference shape {:?} does not match input {:?}",
                r.shape(),
                x.shape()
            )));
        }
    }
    let refs = Tensor::stack(references)?;
    let alphas: Vec<S> = alphas.iter().map(|&a| S::of(a)).collect();
    let method = GraphMethod::ExpectedGradients {
        references: &refs,
        alphas: &alphas,
        k: references.len(),
    };
    let a = first_order(model, &row, &[target], &method)?.reshape(x.shape())?;
    Ok(Attribution {
        values: a,
        method: Method::ExpectedGradients,
        baseline: Baseline::Zero,
        target,
        steps: references.len(),
    })
}

/// Per-reference Expected Gradients terms, one row per reference.
pub(crate) fn expected_gradient_draws<S: Scalar>(
    model: &dyn Model<S>,
    x: &Tensor<S>,
    target: usize,
    references: &Tensor<S>,
    alphas: &[S],
) -> Result<Tensor<S>> {
    let row = as_row(model, x)?;
    let tape = Tape::new();
    let t = super::graph::expected_gradient_terms(
        &tape,
        &|v| model.logits(&tape, v),
        &row,
        &[target],
        references,
        alphas,
        references.shape()[0],
        Order::First,
    )?;
    let out = t.value().as_ref().clone();
    Ok(out)
}

/// Gradient of the log target logit.
///
/// Non-positive logits are an error unless `stabilized`, which uses
/// `log(F + 1e-6)` instead.
pub fn rrr_attr<S: Scalar>(
    model: &dyn Model<S>,
    x: &Tensor<S>,
    target: usize,
    stabilized: bool,
) -> Result<Attribution<S>> {
    let eps = stabilized.then(|| S::of(RRR_EPS));
    let a = single(model, x, target, &GraphMethod::LogGradient { eps })?;
    Ok(plain(a, Method::Rrr, target))
}

/// Uniform noise in `[-1, 1)`, the uninformed reference ranking.
pub fn random_attr<S: Scalar>(n: usize, seed: u64) -> Attribution<S> {
    let mut rng = rng::stream(seed, &[rng::tag("random-attribution")]);
    let values = Tensor::vector((0..n).map(|_| S::of(rng.gen_range(-1.0..1.0))).collect());
    plain(values, Method::Random, 0)
}

/// Settings for [`attribute_batch`] that only some methods read.
#[derive(Clone, Debug)]
pub struct BatchOptions<S: Scalar> {
    /// Reference pool that Expected Gradients samples from, `[b, n]`.
    pub background: Option<Tensor<S>>,
    /// IG baseline; zero when absent.
    pub baseline: Option<Tensor<S>>,
    pub stabilized: bool,
    pub seed: u64,
}

impl<S: Scalar> Default for BatchOptions<S> {
    fn default() -> Self {
        Self {
            background: None,
            baseline: None,
            stabilized: false,
            seed: 0,
        }
    }
}

/// Attributions for every row of `xs` (`[m, n]`), returned as `[m, n]`.
pub fn attribute_batch<S: Scalar>(
    model: &dyn Model<S>,
    xs: &Tensor<S>,
    targets: &[usize],
    choice: MethodChoice,
    opts: &BatchOptions<S>,
) -> Result<Tensor<S>> {
    check_batch(model, xs, targets)?;
    let (m, n) = (xs.shape()[0], xs.shape()[1]);
    match choice.method {
        Method::Gradient => first_order(model, xs, targets, &GraphMethod::Gradient),
        Method::InputXGradient => first_order(model, xs, targets, &GraphMethod::InputXGradient),
        Method::XGradient => {
            require_homogeneous(model)?;
            first_order(model, xs, targets, &GraphMethod::XGradient)
        }
        Method::ClosedFormIg => Err(Error::InvalidArgument(
            "the closed-form degree-k variant is single-input only".into(),
        )),
        Method::Rrr => {
            let eps = opts.stabilized.then(|| S::of(RRR_EPS));
            first_order(model, xs, targets, &GraphMethod::LogGradient { eps })
        }
        Method::IntegratedGradients => {
            let baselines = match &opts.baseline {
                None => Tensor::zeros(&[m, n]),
                Some(b) if b.shape() == [n] => {
                    Tensor::stack(&vec![b.clone(); m])?
                }
                Some(b) => {
                    return Err(Error::InvalidArgument(format!(
                        "baseline shape {:?} does not match width {n}",
                        b.shape()
                    )))
                }
            };
            ig_rows(model, xs, &baselines, targets, choice.steps)
        }
        Method::ExpectedGradients => {
            let k = choice.steps;
            let background = opts.background.as_ref().ok_or(Error::EmptyReferences)?;
            if k == 0 || background.rank() != 2 || background.shape()[0] == 0 {
                return Err(Error::EmptyReferences);
            }
            if background.shape()[1] != n {
                return Err(Error::InvalidArgument(format!(
                    "background width {} does not match {n}",
                    background.shape()[1]
                )));
            }
            let pool: Vec<usize> = (0..background.shape()[0]).collect();
            let mut refs = Vec::with_capacity(m * k * n);
            let mut alphas = Vec::with_capacity(m * k);
            for r in 0..m {
                let mut rng = rng::stream(opts.seed, &[rng::tag("expected-gradients"), r as u64]);
                for _ in 0..k {
                    let j = *pool.choose(&mut rng).expect("non-empty pool");
                    refs.extend_from_slice(&background.data()[j * n..(j + 1) * n]);
                    alphas.push(S::of(rng.gen::<f64>()));
                }
            }
            let refs = Tensor::from_parts(vec![m * k, n], refs);
            first_order(
                model,
                xs,
                targets,
                &GraphMethod::ExpectedGradients {
                    references: &refs,
                    alphas: &alphas,
                    k,
                },
            )
        }
        Method::Random => {
            let mut rows = Vec::with_capacity(m);
            for r in 0..m {
                let seed = rng::derive_seed(opts.seed, &[r as u64]);
                rows.push(random_attr::<S>(n, seed).values);
            }
            Tensor::stack(&rows)
        }
    }
}
