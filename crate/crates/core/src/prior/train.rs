use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::gini::gini_prior;
use super::{Loss, Optimizer, PriorConfig, PriorKind, PriorMethod, TrainConfig};
use crate::attribution::{attribution_graph, GraphMethod, RRR_EPS};
use crate::autodiff::{Order, Tape, Var};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::network::{Network, ParamVars};
use crate::rng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Loss terms of one batch, recorded on a tape.
pub struct Objective<'t, S: Scalar> {
    pub total: Var<'t, S>,
    pub task: Var<'t, S>,
    pub prior: Option<Var<'t, S>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub epoch: usize,
    pub batch: usize,
    pub task: f64,
    pub prior: Option<f64>,
    pub total: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean total objective over the epoch's batches.
    pub train_loss: f64,
    pub task_loss: f64,
    pub prior: Option<f64>,
    pub val_loss: Option<f64>,
    pub val_auc: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<S: Scalar> {
    pub network: Network<S>,
    pub epochs: Vec<EpochRecord>,
    pub steps: Vec<StepRecord>,
}

fn task_loss<'t, S: Scalar>(logits: Var<'t, S>, labels: &[usize], loss: Loss) -> Result<Var<'t, S>> {
    let tape = logits.tape();
    let shape = logits.shape();
    let m = shape[0];
    match loss {
        Loss::BinaryCrossEntropy => {
            // softplus(z) - y z, written to stay finite for large |z|
            let z = logits.reshape(&[m])?;
            let y = tape.constant(Tensor::vector(labels.iter().map(|&l| S::of(l as f64)).collect()));
            let softplus = z.relu().add(z.abs().neg().exp().add_scalar(S::one()).ln())?;
            Ok(softplus.sub(y.mul(z)?)?.mean())
        }
        Loss::SoftmaxCrossEntropy => {
            let c = shape[1];
            let (shifted, row_max) = shift_rows(logits)?;
            let lse = shifted
                .exp()
                .matmul(tape.constant(Tensor::ones(&[c, 1])))?
                .ln()
                .reshape(&[m])?
                .add(tape.constant(row_max))?;
            let picked: Arc<[usize]> = labels.iter().enumerate().map(|(r, &l)| r * c + l).collect();
            Ok(lse.sub(logits.gather(picked, &[m])?)?.mean())
        }
    }
}

/// `z - max_row(z)` and the row maxima, which are treated as constants.
fn shift_rows<'t, S: Scalar>(z: Var<'t, S>) -> Result<(Var<'t, S>, Tensor<S>)> {
    let shape = z.shape();
    let (m, c) = (shape[0], shape[1]);
    let value = z.value();
    let maxes: Vec<S> = value
        .data()
        .chunks(c)
        .map(|row| row.iter().copied().fold(S::neg_infinity(), S::max))
        .collect();
    let full: Vec<S> = maxes.iter().flat_map(|&v| std::iter::repeat_n(v, c)).collect();
    let shifted = z.sub(z.tape().constant(Tensor::from_parts(vec![m, c], full)))?;
    Ok((shifted, Tensor::vector(maxes)))
}

/// Predicted probability of every class, `[m, outputs]`.
fn probabilities<'t, S: Scalar>(logits: Var<'t, S>, loss: Loss) -> Result<Var<'t, S>> {
    match loss {
        Loss::BinaryCrossEntropy => Ok(logits.neg().exp().add_scalar(S::one()).recip()),
        Loss::SoftmaxCrossEntropy => {
            let c = logits.shape()[1];
            let e = shift_rows(logits)?.0.exp();
            let sums = e.matmul(logits.tape().constant(Tensor::ones(&[c, c])))?;
            e.div(sums)
        }
    }
}

fn attribution_targets(labels: &[usize], loss: Loss) -> Vec<usize> {
    match loss {
        Loss::BinaryCrossEntropy => vec![0; labels.len()],
        Loss::SoftmaxCrossEntropy => labels.to_vec(),
    }
}

/// `task + lambda * Omega(A)` for one batch, where the attribution `A` is
/// recomputed from the bound parameters and stays differentiable in them.
///
/// `references` carries the reference rows and interpolation positions
/// when the prior uses Expected Gradients.
#[allow(clippy::too_many_arguments)]
pub fn batch_objective<'t, S: Scalar>(
    net: &Network<S>,
    params: &ParamVars<'t, S>,
    tape: &'t Tape<S>,
    x: &Tensor<S>,
    labels: &[usize],
    loss: Loss,
    prior: Option<&PriorConfig>,
    references: Option<(&Tensor<S>, &[S])>,
) -> Result<Objective<'t, S>> {
    let logits = net.forward_with(params, tape.constant(x.clone()))?;
    let task = task_loss(logits, labels, loss)?;
    let Some(pc) = prior.filter(|pc| pc.lambda != 0.0) else {
        return Ok(Objective {
            total: task,
            task,
            prior: None,
        });
    };

    let targets = attribution_targets(labels, loss);
    let forward = |v| net.forward_with(params, v);
    let attr = match pc.method {
        PriorMethod::Grad => {
            attribution_graph(tape, forward, x, &targets, &GraphMethod::Gradient, Order::Second)?
        }
        PriorMethod::Xg => {
            attribution_graph(tape, forward, x, &targets, &GraphMethod::XGradient, Order::Second)?
        }
        PriorMethod::Rrr => attribution_graph(
            tape,
            |v| probabilities(net.forward_with(params, v)?, loss),
            x,
            &targets,
            &GraphMethod::LogGradient {
                eps: Some(S::of(RRR_EPS)),
            },
            Order::Second,
        )?,
        PriorMethod::Eg { references: k } => {
            let (refs, alphas) = references.ok_or(Error::EmptyReferences)?;
            let method = GraphMethod::ExpectedGradients {
                references: refs,
                alphas,
                k,
            };
            attribution_graph(tape, forward, x, &targets, &method, Order::Second)?
        }
    };

    let omega = match &pc.kind {
        PriorKind::SparsityGini { signed: false } => gini_prior(attr.abs())?,
        PriorKind::SparsityGini { signed: true } => gini_prior(attr)?,
        PriorKind::ZeroAttributionMask { features } => {
            let (m, n) = (x.shape()[0], x.shape()[1]);
            let idx: Arc<[usize]> = (0..m)
                .flat_map(|r| features.iter().map(move |&f| r * n + f))
                .collect();
            let len = idx.len();
            attr.gather(idx, &[len])?
                .square()
                .sum()
                .scale(S::one() / S::of(m as f64))
        }
    };
    Ok(Objective {
        total: task.add(omega.scale(S::of(pc.lambda)))?,
        task,
        prior: Some(omega),
    })
}

/// Reference rows drawn from `pool` and one uniform position per draw.
fn draw_references<S: Scalar>(pool: &Tensor<S>, m: usize, k: usize, rng: &mut rng::Rng) -> (Tensor<S>, Vec<S>) {
    let n = pool.shape()[1];
    let rows = pool.shape()[0];
    let mut refs = Vec::with_capacity(m * k * n);
    let mut alphas = Vec::with_capacity(m * k);
    for _ in 0..m * k {
        let j = rng.gen_range(0..rows);
        refs.extend_from_slice(&pool.data()[j * n..(j + 1) * n]);
        alphas.push(S::of(rng.gen::<f64>()));
    }
    (Tensor::from_parts(vec![m * k, n], refs), alphas)
}

fn check_labels<S: Scalar>(net: &Network<S>, data: &Dataset<S>, loss: Loss) -> Result<()> {
    let outputs = net.spec().output_dim;
    if data.n_features() != net.spec().input_dim {
        return Err(Error::InvalidArgument(format!(
            "dataset has {} features, network expects {}",
            data.n_features(),
            net.spec().input_dim
        )));
    }
    let limit = match loss {
        Loss::BinaryCrossEntropy => {
            if outputs != 1 {
                return Err(Error::InvalidArgument(format!(
                    "binary cross-entropy needs one output, network has {outputs}"
                )));
            }
            2
        }
        Loss::SoftmaxCrossEntropy => outputs,
    };
    if let Some(l) = data.labels().iter().find(|&&l| l >= limit) {
        return Err(Error::InvalidArgument(format!("label {l} out of range for {limit} classes")));
    }
    Ok(())
}

struct OptimizerState<S: Scalar> {
    step: i32,
    moments: BTreeMap<String, (Vec<S>, Vec<S>)>,
}

impl<S: Scalar> OptimizerState<S> {
    fn apply(&mut self, opt: Optimizer, lr: f64, net: &mut Network<S>, grads: &[(String, Tensor<S>)]) {
        self.step += 1;
        let lr = S::of(lr);
        for (name, g) in grads {
            let p = net.param_mut(name).expect("bound parameter exists");
            match opt {
                Optimizer::Sgd => {
                    for (w, &d) in p.data_mut().iter_mut().zip(g.data()) {
                        *w = *w - lr * d;
                    }
                }
                Optimizer::Adam { beta1, beta2, eps } => {
                    let (m, v) = self
                        .moments
                        .entry(name.clone())
                        .or_insert_with(|| (vec![S::zero(); g.len()], vec![S::zero(); g.len()]));
                    let (b1, b2, eps) = (S::of(beta1), S::of(beta2), S::of(eps));
                    let c1 = S::one() - b1.powi(self.step);
                    let c2 = S::one() - b2.powi(self.step);
                    for i in 0..g.len() {
                        let d = g.data()[i];
                        m[i] = b1 * m[i] + (S::one() - b1) * d;
                        v[i] = b2 * v[i] + (S::one() - b2) * d * d;
                        let step = (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
                        p.data_mut()[i] = p.data()[i] - lr * step;
                    }
                }
            }
        }
    }
}

/// Scores for ROC-AUC: the logit for one-output nets, otherwise the
/// margin of class 1 over class 0.
pub(crate) fn positive_scores<S: Scalar>(net: &Network<S>, x: &Tensor<S>) -> Result<Vec<f64>> {
    let out = net.predict(x)?;
    let c = net.spec().output_dim;
    Ok(out
        .data()
        .chunks(c)
        .map(|row| if c == 1 { row[0].as_f64() } else { (row[1] - row[0]).as_f64() })
        .collect())
}

fn evaluate<S: Scalar>(net: &Network<S>, data: &Dataset<S>, loss: Loss) -> Result<(f64, Option<f64>)> {
    let tape = Tape::new();
    let params = net.bind(&tape, false);
    let l = tape.no_grad(|| -> Result<f64> {
        let logits = net.forward_with(&params, tape.constant(data.features().clone()))?;
        Ok(task_loss(logits, data.labels(), loss)?.item().as_f64())
    })?;
    let auc = if data.n_classes() == 2 || (data.n_classes() == 1 && loss == Loss::BinaryCrossEntropy) {
        super::roc_auc(&positive_scores(net, data.features())?, data.labels()).ok()
    } else {
        None
    };
    Ok((l, auc))
}

/// Mini-batch training of `task + lambda * Omega`. With `prior` absent or
/// `lambda == 0` this is plain training, bit for bit.
pub fn train<S: Scalar>(
    net: &Network<S>,
    data: &Dataset<S>,
    tc: &TrainConfig,
    prior: Option<&PriorConfig>,
    validation: Option<&Dataset<S>>,
) -> Result<TrainOutcome<S>> {
    tc.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    check_labels(net, data, tc.loss)?;
    if let Some(v) = validation {
        check_labels(net, v, tc.loss)?;
    }
    if let Some(pc) = prior {
        pc.validate(&net.classify_homogeneity(), data.n_features())?;
    }

    let mut net = net.clone();
    let mut state = OptimizerState {
        step: 0,
        moments: BTreeMap::new(),
    };
    let n = data.n_features();
    let mut epochs = Vec::with_capacity(tc.epochs);
    let mut steps = Vec::new();
    let mut order: Vec<usize> = (0..data.len()).collect();

    for epoch in 0..tc.epochs {
        let mut shuffle = rng::stream(tc.seed, &[rng::tag("shuffle"), epoch as u64]);
        order.shuffle(&mut shuffle);
        let (mut sum_total, mut sum_task, mut sum_prior) = (0.0, 0.0, 0.0);
        let mut batches = 0;
        for (b, chunk) in order.chunks(tc.batch_size).enumerate() {
            let mut xb = Vec::with_capacity(chunk.len() * n);
            let mut yb = Vec::with_capacity(chunk.len());
            for &i in chunk {
                xb.extend_from_slice(&data.features().data()[i * n..(i + 1) * n]);
                yb.push(data.labels()[i]);
            }
            let xb = Tensor::from_parts(vec![chunk.len(), n], xb);

            let draws = match prior {
                Some(PriorConfig {
                    method: PriorMethod::Eg { references },
                    lambda,
                    ..
                }) if *lambda != 0.0 => {
                    let mut r = rng::stream(tc.seed, &[rng::tag("prior-references"), epoch as u64, b as u64]);
                    Some(draw_references(data.features(), chunk.len(), *references, &mut r))
                }
                _ => None,
            };

            let tape = Tape::new();
            let params = net.bind(&tape, true);
            let obj = batch_objective(
                &net,
                &params,
                &tape,
                &xb,
                &yb,
                tc.loss,
                prior,
                draws.as_ref().map(|(t, a)| (t, a.as_slice())),
            )?;
            let record = StepRecord {
                epoch,
                batch: b,
                task: obj.task.item().as_f64(),
                prior: obj.prior.map(|p| p.item().as_f64()),
                total: obj.total.item().as_f64(),
            };
            let names: Vec<String> = params.names().map(str::to_string).collect();
            let grads = tape.grad(obj.total, &params.vars())?;
            if !record.total.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                let mut trace: Vec<f64> = steps.iter().map(|s: &StepRecord| s.total).collect();
                trace.push(record.total);
                return Err(Error::Divergence {
                    epoch,
                    loss: record.total,
                    trace,
                });
            }
            state.apply(tc.optimizer, tc.learning_rate, &mut net, &names.into_iter().zip(grads).collect::<Vec<_>>());
            sum_total += record.total;
            sum_task += record.task;
            sum_prior += record.prior.unwrap_or(0.0);
            batches += 1;
            steps.push(record);
        }
        let (val_loss, val_auc) = match validation {
            Some(v) if !v.is_empty() => {
                let (l, a) = evaluate(&net, v, tc.loss)?;
                (Some(l), a)
            }
            _ => (None, None),
        };
        let k = batches.max(1) as f64;
        epochs.push(EpochRecord {
            epoch,
            train_loss: sum_total / k,
            task_loss: sum_task / k,
            prior: prior.filter(|p| p.lambda != 0.0).map(|_| sum_prior / k),
            val_loss,
            val_auc,
        });
    }
    Ok(TrainOutcome {
        network: net,
        epochs,
        steps,
    })
}
