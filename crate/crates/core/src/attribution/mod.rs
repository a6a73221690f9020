//! Feature attribution methods.

mod convergence;
mod diff;
mod graph;
mod io;
mod methods;

#[cfg(test)]
mod tests;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub use convergence::{ig_convergence, mean_call_time, ConvergencePoint, ORACLE_STEPS, SWEEP_STEPS};
pub use diff::{mean_abs_rel_diff, mean_abs_rel_diff_rows, RelDiff, REL_DIFF_EPS};
pub use graph::{attribution_graph, select_targets, GraphMethod};
pub use io::{write_csv, AttributionRecord};
pub(crate) use methods::expected_gradient_draws;
pub use methods::{
    attribute_batch, closed_form_ig_degree_k, expected_gradients, expected_gradients_with_alphas,
    grad_attr, input_x_grad, integrated_gradients, random_attr, rrr_attr, x_gradient, BatchOptions,
    DEFAULT_STEPS, RRR_EPS,
};

/// Which attribution method produced a set of values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Gradient,
    InputXGradient,
    XGradient,
    IntegratedGradients,
    ExpectedGradients,
    Rrr,
    ClosedFormIg,
    Random,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Gradient => "grad",
            Method::InputXGradient => "ixg",
            Method::XGradient => "xg",
            Method::IntegratedGradients => "ig",
            Method::ExpectedGradients => "eg",
            Method::Rrr => "rrr",
            Method::ClosedFormIg => "ig-closed",
            Method::Random => "random",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// The reference point an attribution is measured against.
#[derive(Clone, Debug, PartialEq)]
pub enum Baseline<S: Scalar> {
    Zero,
    Tensor(Tensor<S>),
}

impl<S: Scalar> Baseline<S> {
    pub fn to_tensor(&self, n: usize) -> Tensor<S> {
        match self {
            Baseline::Zero => Tensor::zeros(&[n]),
            Baseline::Tensor(t) => t.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Attribution<S: Scalar> {
    pub values: Tensor<S>,
    pub method: Method,
    pub baseline: Baseline<S>,
    pub target: usize,
    /// Riemann steps or reference count; 0 where it does not apply.
    pub steps: usize,
}

impl<S: Scalar> Attribution<S> {
    pub fn total(&self) -> S {
        self.values.sum()
    }
}

/// A method together with its step or sample count, e.g. `ig@128`, `eg@32`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MethodChoice {
    pub method: Method,
    pub steps: usize,
}

impl MethodChoice {
    pub const fn new(method: Method, steps: usize) -> Self {
        Self { method, steps }
    }
}

impl fmt::Display for MethodChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.method {
            Method::IntegratedGradients | Method::ExpectedGradients => {
                write!(f, "{}@{}", self.method.label(), self.steps)
            }
            m => f.write_str(m.label()),
        }
    }
}

impl FromStr for MethodChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let lower = s.trim().to_ascii_lowercase();
        let (name, count) = match lower.split_once('@') {
            Some((n, c)) => {
                let c: usize = c
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("bad count in method {s:?}")))?;
                if c == 0 {
                    return Err(Error::InvalidArgument(format!("count must be positive in {s:?}")));
                }
                (n.to_string(), Some(c))
            }
            // Shorthand such as `eg32` or `ig128`.
            None => match lower.find(|c: char| c.is_ascii_digit()) {
                Some(i) if i > 0 && (lower.starts_with("eg") || lower.starts_with("ig")) => {
                    let c: usize = lower[i..]
                        .parse()
                        .map_err(|_| Error::InvalidArgument(format!("bad count in method {s:?}")))?;
                    if c == 0 {
                        return Err(Error::InvalidArgument(format!("count must be positive in {s:?}")));
                    }
                    (lower[..i].to_string(), Some(c))
                }
                _ => (lower, None),
            },
        };
        let method = match name.as_str() {
            "grad" | "gradient" => Method::Gradient,
            "ixg" | "input-x-gradient" => Method::InputXGradient,
            "xg" | "x-gradient" => Method::XGradient,
            "ig" | "integrated-gradients" => Method::IntegratedGradients,
            "eg" | "expected-gradients" => Method::ExpectedGradients,
            "rrr" => Method::Rrr,
            "random" => Method::Random,
            _ => return Err(Error::InvalidArgument(format!("unknown method {s:?}"))),
        };
        let steps = match method {
            Method::IntegratedGradients => count.unwrap_or(DEFAULT_STEPS),
            Method::ExpectedGradients => count.unwrap_or(1),
            _ if count.is_some() => {
                return Err(Error::InvalidArgument(format!("{name} takes no count")))
            }
            _ => 0,
        };
        Ok(Self { method, steps })
    }
}
