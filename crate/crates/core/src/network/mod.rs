//! Feedforward networks built from bias-optional linear layers, two-slope
//! piecewise-linear activations and order/linear pooling.

mod io;
mod model;
mod spec;

pub use io::{load_spec, FORMAT, VERSION};
pub use model::{FnModel, LinearCombination, Model, Network, ParamVars};

pub use spec::{Activation, Geometry, Homogeneity, LayerSpec, NetworkSpec, Pooling};
