//! Masking benchmarks for attribution quality: keep positive (KPM), keep
//! negative (KNM), keep absolute (KAM) and remove absolute (RAM) masks.
//!
//! Each metric masks features in an order derived from the attributions,
//! measures the model at a grid of masked fractions and reports the
//! trapezoid area under that curve.

mod table;


use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::autodiff::Tape;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::network::Model;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub use table::{benchmark_table, BenchmarkRow, BenchmarkTable};

/// Masked fractions `0, 0.1, ..., 1`.
pub fn default_fractions() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Metric {
    Kpm,
    Knm,
    Kam,
    Ram,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Kpm, Metric::Knm, Metric::Kam, Metric::Ram];

    /// Whether a larger area is better.
    pub fn higher_is_better(self) -> bool {
        matches!(self, Metric::Kpm | Metric::Kam)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Kpm => "KPM",
            Metric::Knm => "KNM",
            Metric::Kam => "KAM",
            Metric::Ram => "RAM",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MaskKind {
    MeanSubstitution,
    FixedReference,
}

/// Replaces masked features by a per-feature reference value.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskFn<S: Scalar> {
    kind: MaskKind,
    reference: Tensor<S>,
    description: String,
}

impl<S: Scalar> MaskFn<S> {
    /// Substitutes the column means of `data`.
    pub fn mean_substitution(data: &Dataset<S>) -> Self {
        Self {
            kind: MaskKind::MeanSubstitution,
            reference: data.column_means(),
            description: format!("mean substitution over {} rows", data.len()),
        }
    }

    pub fn fixed_reference(reference: Tensor<S>) -> Result<Self> {
        if reference.rank() != 1 {
            return Err(Error::InvalidArgument(format!(
                "mask reference must be a vector, got {:?}",
                reference.shape()
            )));
        }
        Ok(Self {
            kind: MaskKind::FixedReference,
            description: format!("fixed reference of width {}", reference.len()),
            reference,
        })
    }

    pub fn zero(n: usize) -> Self {
        Self {
            kind: MaskKind::FixedReference,
            reference: Tensor::zeros(&[n]),
            description: "zero reference".into(),
        }
    }

    pub fn kind(&self) -> &MaskKind {
        &self.kind
    }

    pub fn reference(&self) -> &Tensor<S> {
        &self.reference
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    /// Copy of `row` with every feature flagged in `masked` replaced.
    pub fn apply(&self, row: &[S], masked: &[bool]) -> Vec<S> {
        row.iter()
            .zip(masked)
            .zip(self.reference.data())
            .map(|((&x, &m), &r)| if m { r } else { x })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    pub metric: Metric,
    pub method: String,
    /// `(masked fraction, measurement)` pairs.
    pub curve: Vec<(f64, f64)>,
    pub auc: f64,
}

/// Inputs shared by every metric evaluation.
pub struct MetricInput<'a, S: Scalar> {
    pub model: &'a dyn Model<S>,
    /// `[m, n]`.
    pub inputs: &'a Tensor<S>,
    /// Class whose logit is measured by KPM and KNM.
    pub targets: &'a [usize],
    /// True classes used for the accuracy of KAM and RAM.
    pub labels: &'a [usize],
    pub mask: &'a MaskFn<S>,
}

impl<S: Scalar> MetricInput<'_, S> {
    fn validate(&self, fractions: &[f64]) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        let n = self.model.input_dim();
        if self.inputs.rank() != 2 || self.inputs.shape()[1] != n {
            return bad(format!("inputs {:?} do not match input dim {n}", self.inputs.shape()));
        }
        let m = self.inputs.shape()[0];
        if m == 0 {
            return bad("no inputs to evaluate".into());
        }
        if self.targets.len() != m || self.labels.len() != m {
            return bad(format!(
                "{} targets and {} labels for {m} inputs",
                self.targets.len(),
                self.labels.len()
            ));
        }
        if self.mask.reference.len() != n {
            return bad(format!("mask width {} does not match {n}", self.mask.reference.len()));
        }
        let outputs = self.model.output_dim();
        if let Some(&t) = self.targets.iter().find(|&&t| t >= outputs) {
            return Err(Error::InvalidTarget { target: t, outputs });
        }
        if fractions.is_empty() {
            return bad("empty fraction grid".into());
        }
        if fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return bad("fractions must lie in [0, 1]".into());
        }
        if fractions.windows(2).any(|w| w[0] >= w[1]) {
            return bad("fractions must be strictly increasing".into());
        }
        Ok(())
    }
}

/// Features sorted by `key` ascending, ties by index.
fn order_by(indices: impl Iterator<Item = usize>, key: impl Fn(usize) -> f64) -> Vec<usize> {
    let mut v: Vec<usize> = indices.collect();
    v.sort_by(|&a, &b| key(a).partial_cmp(&key(b)).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
    v
}

/// Per-row plan: features masked at every fraction, and the progressive order.
fn plan(metric: Metric, attr: &[f64]) -> (Vec<usize>, Vec<usize>) {
    let idx = 0..attr.len();
    match metric {
        Metric::Kpm => (
            idx.clone().filter(|&i| attr[i] < 0.0).collect(),
            order_by(idx.filter(|&i| attr[i] > 0.0), |i| attr[i]),
        ),
        Metric::Knm => (
            idx.clone().filter(|&i| attr[i] > 0.0).collect(),
            order_by(idx.filter(|&i| attr[i] < 0.0), |i| -attr[i]),
        ),
        Metric::Kam => (Vec::new(), order_by(idx, |i| attr[i].abs())),
        Metric::Ram => (Vec::new(), order_by(idx, |i| -attr[i].abs())),
    }
}

fn masked_count(fraction: f64, len: usize) -> usize {
    ((fraction * len as f64).round() as usize).min(len)
}

pub(crate) fn batch_logits<S: Scalar>(model: &dyn Model<S>, xs: &Tensor<S>) -> Result<Tensor<S>> {
    let tape = Tape::new();
    let x = tape.constant(xs.clone());
    let out = model.logits(&tape, x)?;
    let value = out.value().as_ref().clone();
    Ok(value)
}

/// Predicted class per row; a single output is read as the logit of class 1.
pub(crate) fn predicted_classes<S: Scalar>(logits: &Tensor<S>) -> Vec<usize> {
    let c = logits.shape()[1];
    logits
        .data()
        .chunks(c)
        .map(|row| {
            if c == 1 {
                usize::from(row[0] > S::zero())
            } else {
                let mut best = 0;
                for (j, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = j;
                    }
                }
                best
            }
        })
        .collect()
}

/// Runs one metric with precomputed attributions `[m, n]`.
pub fn evaluate_metric<S: Scalar>(
    input: &MetricInput<'_, S>,
    attributions: &Tensor<S>,
    method: &str,
    metric: Metric,
    fractions: &[f64],
) -> Result<MetricResult> {
    input.validate(fractions)?;
    if attributions.shape() != input.inputs.shape() {
        return Err(Error::InvalidArgument(format!(
            "attributions {:?} do not match inputs {:?}",
            attributions.shape(),
            input.inputs.shape()
        )));
    }
    let (m, n) = (input.inputs.shape()[0], input.inputs.shape()[1]);
    let plans: Vec<_> = attributions
        .data()
        .chunks(n)
        .map(|row| plan(metric, &row.iter().map(|v| v.to_f64().unwrap_or(0.0)).collect::<Vec<_>>()))
        .collect();

    let mut curve = Vec::with_capacity(fractions.len());
    let mut masked_rows = Vec::with_capacity(m * n);
    for &f in fractions {
        masked_rows.clear();
        for (r, (always, progressive)) in plans.iter().enumerate() {
            let mut flags = vec![false; n];
            for &i in always {
                flags[i] = true;
            }
            for &i in &progressive[..masked_count(f, progressive.len())] {
                flags[i] = true;
            }
            let row = &input.inputs.data()[r * n..(r + 1) * n];
            masked_rows.extend(input.mask.apply(row, &flags));
        }
        let logits = batch_logits(input.model, &Tensor::new(&[m, n], masked_rows.clone())?)?;
        let value = match metric {
            Metric::Kpm | Metric::Knm => {
                let c = logits.shape()[1];
                let total: f64 = input
                    .targets
                    .iter()
                    .enumerate()
                    .map(|(r, &t)| logits.data()[r * c + t].to_f64().unwrap_or(f64::NAN))
                    .sum();
                total / m as f64
            }
            Metric::Kam | Metric::Ram => {
                let hits = predicted_classes(&logits)
                    .iter()
                    .zip(input.labels)
                    .filter(|(p, l)| p == l)
                    .count();
                hits as f64 / m as f64
            }
        };
        curve.push((f, value));
    }
    Ok(MetricResult {
        metric,
        method: method.to_string(),
        auc: trapezoid(&curve),
        curve,
    })
}

pub fn trapezoid(curve: &[(f64, f64)]) -> f64 {
    curve
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum()
}
