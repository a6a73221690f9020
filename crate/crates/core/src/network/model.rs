use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng as _;

use super::spec::{Activation, Geometry, Homogeneity, LayerSpec, NetworkSpec, Pooling};
use crate::autodiff::{window_groups, SelectMode, Tape, Var};
use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Anything that maps a `[m, n]` input batch to `[m, outputs]` logits on a tape.
pub trait Model<S: Scalar> {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn homogeneity(&self) -> Homogeneity;
    fn logits<'t>(&self, tape: &'t Tape<S>, x: Var<'t, S>) -> Result<Var<'t, S>>;
}

/// A network spec with instantiated parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Network<S: Scalar> {
    spec: NetworkSpec,
    params: BTreeMap<String, Tensor<S>>,
}

/// Network parameters placed on a tape.
pub struct ParamVars<'t, S: Scalar> {
    vars: BTreeMap<String, Var<'t, S>>,
}

impl<'t, S: Scalar> ParamVars<'t, S> {
    pub fn get(&self, name: &str) -> Option<Var<'t, S>> {
        self.vars.get(name).copied()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.vars.keys().map(String::as_str)
    }

    pub fn vars(&self) -> Vec<Var<'t, S>> {
        self.vars.values().copied().collect()
    }
}

pub(crate) fn weight_name(layer: usize) -> String {
    format!("layers.{layer}.weight")
}

pub(crate) fn bias_name(layer: usize) -> String {
    format!("layers.{layer}.bias")
}

pub(crate) fn slope_name(layer: usize) -> String {
    format!("layers.{layer}.slope")
}

impl<S: Scalar> Network<S> {
    /// Scaled-uniform weights with bound `sqrt(6 / (fan_in + fan_out))`,
    /// zero biases, PReLU slopes at their configured initial value.
    pub fn init(spec: NetworkSpec, seed: u64) -> Result<Self> {
        let geo = spec.validate()?;
        let mut rng = rng::stream(seed, &[rng::tag("init")]);
        let mut params = BTreeMap::new();
        let mut prev = spec.input_geometry();
        for (i, layer) in spec.layers.iter().enumerate() {
            match layer {
                LayerSpec::Dense { units, has_bias } => {
                    let fan_in = prev.features();
                    let bound = (6.0 / (fan_in + units) as f64).sqrt();
                    let w = (0..units * fan_in)
                        .map(|_| S::of(rng.gen_range(-bound..bound)))
                        .collect();
                    params.insert(weight_name(i), Tensor::from_parts(vec![*units, fan_in], w));
                    if *has_bias {
                        params.insert(bias_name(i), Tensor::zeros(&[*units]));
                    }
                }
                LayerSpec::Conv1d {
                    out_channels,
                    kernel,
                    has_bias,
                    ..
                } => {
                    let fan_in = kernel * prev.channels;
                    let fan_out = kernel * out_channels;
                    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                    let w = (0..out_channels * fan_in)
                        .map(|_| S::of(rng.gen_range(-bound..bound)))
                        .collect();
                    params.insert(
                        weight_name(i),
                        Tensor::from_parts(vec![*out_channels, fan_in], w),
                    );
                    if *has_bias {
                        params.insert(bias_name(i), Tensor::zeros(&[*out_channels]));
                    }
                }
                LayerSpec::Activation {
                    activation_kind: Activation::Prelu { init },
                } => {
                    params.insert(slope_name(i), Tensor::scalar(S::of(*init)));
                }
                _ => {}
            }
            prev = geo[i];
        }
        Ok(Self { spec, params })
    }

    /// Builds a network from explicit parameters, checking names and shapes.
    pub fn from_parts(spec: NetworkSpec, params: BTreeMap<String, Tensor<S>>) -> Result<Self> {
        let template = Network::<S>::init(spec.clone(), 0)?;
        for (name, t) in &template.params {
            match params.get(name) {
                Some(p) if p.shape() == t.shape() => {}
                Some(p) => {
                    return Err(Error::InvalidSpec(format!(
                        "parameter {name} has shape {:?}, expected {:?}",
                        p.shape(),
                        t.shape()
                    )))
                }
                None => return Err(Error::InvalidSpec(format!("missing parameter {name}"))),
            }
        }
        if let Some(extra) = params.keys().find(|k| !template.params.contains_key(*k)) {
            return Err(Error::InvalidSpec(format!("unexpected parameter {extra}")));
        }
        if let Some((name, _)) = params.iter().find(|(_, t)| !t.is_finite()) {
            return Err(Error::InvalidSpec(format!("parameter {name} is not finite")));
        }
        Ok(Self { spec, params })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn params(&self) -> &BTreeMap<String, Tensor<S>> {
        &self.params
    }

    pub fn param(&self, name: &str) -> Option<&Tensor<S>> {
        self.params.get(name)
    }

    pub fn param_mut(&mut self, name: &str) -> Option<&mut Tensor<S>> {
        self.params.get_mut(name)
    }

    pub fn param_count(&self) -> usize {
        self.params.values().map(Tensor::len).sum()
    }

    pub fn classify_homogeneity(&self) -> Homogeneity {
        self.spec.classify_homogeneity()
    }

    /// The same network with every bias removed; weights and slopes are kept.
    pub fn strip_bias(&self) -> Self {
        let spec = self.spec.without_bias();
        let params = self
            .params
            .iter()
            .filter(|(k, _)| !k.ends_with(".bias"))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        Self { spec, params }
    }

    /// Places the parameters on `tape`, as differentiable leaves when
    /// `trainable` is set and as constants otherwise.
    pub fn bind<'t>(&self, tape: &'t Tape<S>, trainable: bool) -> ParamVars<'t, S> {
        let vars = self
            .params
            .iter()
            .map(|(k, v)| {
                let var = if trainable {
                    tape.var(v.clone())
                } else {
                    tape.constant(v.clone())
                };
                (k.clone(), var)
            })
            .collect();
        ParamVars { vars }
    }

    /// Forward pass for a `[m, input_dim]` batch using bound parameters.
    pub fn forward_with<'t>(
        &self,
        params: &ParamVars<'t, S>,
        x: Var<'t, S>,
    ) -> Result<Var<'t, S>> {
        let shape = x.shape();
        if shape.len() != 2 || shape[1] != self.spec.input_dim {
            return Err(Error::ShapeMismatch {
                node: x.id(),
                op: "network input",
                detail: format!(
                    "expected [batch, {}], got {:?}",
                    self.spec.input_dim, shape
                ),
            });
        }
        let m = shape[0];
        let param = |name: String| {
            params
                .get(&name)
                .ok_or_else(|| Error::InvalidSpec(format!("unbound parameter {name}")))
        };
        let mut geo = self.spec.input_geometry();
        let mut h = x;
        let mut outputs: Vec<Var<'t, S>> = Vec::with_capacity(self.spec.layers.len());
        for (i, layer) in self.spec.layers.iter().enumerate() {
            let (next, next_geo) = match layer {
                LayerSpec::Dense { units, has_bias } => {
                    let w = param(weight_name(i))?;
                    let mut z = h.matmul_t(w, false, true)?;
                    if *has_bias {
                        z = z.add(param(bias_name(i))?)?;
                    }
                    (
                        z,
                        Geometry {
                            length: *units,
                            channels: 1,
                        },
                    )
                }
                LayerSpec::Conv1d {
                    out_channels,
                    kernel,
                    stride,
                    has_bias,
                } => {
                    let out_len = (geo.length - kernel) / stride + 1;
                    let idx = im2col_indices(m, geo, *kernel, *stride);
                    let patches = h.gather(idx, &[m * out_len, kernel * geo.channels])?;
                    let mut z = patches.matmul_t(param(weight_name(i))?, false, true)?;
                    if *has_bias {
                        z = z.add(param(bias_name(i))?)?;
                    }
                    let z = z.reshape(&[m, out_len * out_channels])?;
                    (
                        z,
                        Geometry {
                            length: out_len,
                            channels: *out_channels,
                        },
                    )
                }
                LayerSpec::Activation { activation_kind } => {
                    let z = match activation_kind {
                        Activation::Relu => h.relu(),
                        Activation::LeakyRelu { slope } => h.leaky_relu(S::of(*slope)),
                        Activation::Prelu { .. } => {
                            let a = param(slope_name(i))?;
                            h.relu().sub(h.neg().relu().mul(a)?)?
                        }
                        Activation::Identity => h,
                    };
                    (z, geo)
                }
                LayerSpec::Pooling {
                    pooling_kind,
                    pool_window,
                } => match pooling_kind {
                    Pooling::Identity => (h, geo),
                    Pooling::GlobalAverage => {
                        let groups = window_groups(geo.features(), geo.length, geo.channels)?;
                        (
                            h.group_mean(&groups)?,
                            Geometry {
                                length: 1,
                                channels: geo.channels,
                            },
                        )
                    }
                    kind => {
                        let groups = window_groups(geo.features(), *pool_window, geo.channels)?;
                        let z = match kind {
                            Pooling::Max => h.select_pool(Arc::new(groups), SelectMode::Max)?,
                            Pooling::Min => h.select_pool(Arc::new(groups), SelectMode::Min)?,
                            _ => h.group_mean(&groups)?,
                        };
                        (
                            z,
                            Geometry {
                                length: geo.length / pool_window,
                                channels: geo.channels,
                            },
                        )
                    }
                },
                LayerSpec::SkipMerge { from } => (h.add(outputs[*from])?, geo),
            };
            h = next;
            geo = next_geo;
            outputs.push(h);
        }
        Ok(h)
    }

    /// Output logits for a single input `[n]` (returns `[outputs]`) or a
    /// batch `[m, n]` (returns `[m, outputs]`).
    pub fn predict(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        let tape = Tape::new();
        let single = x.rank() == 1;
        let batch = if single {
            x.reshape(&[1, x.len()])?
        } else {
            x.clone()
        };
        let params = self.bind(&tape, false);
        let xv = tape.constant(batch);
        let out = self.forward_with(&params, xv)?;
        let out = (*out.value()).clone();
        if single {
            out.reshape(&[self.spec.output_dim])
        } else {
            Ok(out)
        }
    }
}

/// Flat source indices of the `[m * out_len, kernel * channels]` patch matrix.
fn im2col_indices(m: usize, geo: Geometry, kernel: usize, stride: usize) -> Arc<[usize]> {
    let out_len = (geo.length - kernel) / stride + 1;
    let n = geo.features();
    let mut idx = Vec::with_capacity(m * out_len * kernel * geo.channels);
    for r in 0..m {
        for p in 0..out_len {
            for k in 0..kernel {
                for c in 0..geo.channels {
                    idx.push(r * n + (p * stride + k) * geo.channels + c);
                }
            }
        }
    }
    idx.into()
}

impl<S: Scalar> Model<S> for Network<S> {
    fn input_dim(&self) -> usize {
        self.spec.input_dim
    }

    fn output_dim(&self) -> usize {
        self.spec.output_dim
    }

    fn homogeneity(&self) -> Homogeneity {
        self.classify_homogeneity()
    }

    fn logits<'t>(&self, tape: &'t Tape<S>, x: Var<'t, S>) -> Result<Var<'t, S>> {
        let params = self.bind(tape, false);
        self.forward_with(&params, x)
    }
}

type LogitFn<'a, S> = dyn for<'t> Fn(&'t Tape<S>, Var<'t, S>) -> Result<Var<'t, S>> + 'a;

/// A model given by a closure, with a declared homogeneity.
pub struct FnModel<'a, S: Scalar> {
    input_dim: usize,
    output_dim: usize,
    homogeneity: Homogeneity,
    f: Box<LogitFn<'a, S>>,
}

impl<'a, S: Scalar> FnModel<'a, S> {
    pub fn new(
        input_dim: usize,
        output_dim: usize,
        homogeneity: Homogeneity,
        f: impl for<'t> Fn(&'t Tape<S>, Var<'t, S>) -> Result<Var<'t, S>> + 'a,
    ) -> Self {
        Self {
            input_dim,
            output_dim,
            homogeneity,
            f: Box::new(f),
        }
    }
}

impl<S: Scalar> Model<S> for FnModel<'_, S> {
    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn output_dim(&self) -> usize {
        self.output_dim
    }

    fn homogeneity(&self) -> Homogeneity {
        self.homogeneity.clone()
    }

    fn logits<'t>(&self, tape: &'t Tape<S>, x: Var<'t, S>) -> Result<Var<'t, S>> {
        (self.f)(tape, x)
    }
}

/// `sum_k c_k F_k`, evaluated as one graph.
pub struct LinearCombination<'a, S: Scalar> {
    terms: Vec<(S, &'a dyn Model<S>)>,
}

impl<'a, S: Scalar> LinearCombination<'a, S> {
    pub fn new(terms: Vec<(S, &'a dyn Model<S>)>) -> Result<Self> {
        let first = terms
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty linear combination".into()))?;
        let (i, o) = (first.1.input_dim(), first.1.output_dim());
        if terms.iter().any(|(_, m)| m.input_dim() != i || m.output_dim() != o) {
            return Err(Error::InvalidArgument(
                "combined models must share input and output dims".into(),
            ));
        }
        Ok(Self { terms })
    }
}

impl<S: Scalar> Model<S> for LinearCombination<'_, S> {
    fn input_dim(&self) -> usize {
        self.terms[0].1.input_dim()
    }

    fn output_dim(&self) -> usize {
        self.terms[0].1.output_dim()
    }

    fn homogeneity(&self) -> Homogeneity {
        self.terms
            .iter()
            .fold(Homogeneity::Homogeneous, |acc, (_, m)| acc.and(m.homogeneity()))
    }

    fn logits<'t>(&self, tape: &'t Tape<S>, x: Var<'t, S>) -> Result<Var<'t, S>> {
        let mut acc: Option<Var<'t, S>> = None;
        for (c, m) in &self.terms {
            let y = m.logits(tape, x)?.scale(*c);
            acc = Some(match acc {
                Some(a) => a.add(y)?,
                None => y,
            });
        }
        Ok(acc.expect("non-empty"))
    }
}
