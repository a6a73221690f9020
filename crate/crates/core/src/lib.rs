//! Fast axiomatic feature attribution for nonnegatively homogeneous networks.
//!
//! For a network `F` with `F(a x) = a F(x)` for all `a >= 0` (built from
//! bias-free layers, two-slope piecewise-linear activations and
//! linear or order-selecting pooling), Integrated Gradients with the zero
//! baseline collapses to `x * dF/dx`. This crate provides that closed form
//! (X-Gradient), the reference methods it is compared against, executable
//! axiom checks, attribution-prior training that differentiates through
//! attributions, and masking-based attribution quality metrics.
//!
//! Numeric code is generic over [`Scalar`]; the aliases below fix it to `f64`.

pub mod attribution;
pub mod autodiff;
pub mod axioms;
pub mod data;
pub mod error;
pub mod metrics;
pub mod network;
pub mod prior;
pub mod rng;
pub mod scalar;
pub mod tensor;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Tensor = tensor::Tensor<f64>;
pub type Tensor32 = tensor::Tensor<f32>;
pub type Tape = autodiff::Tape<f64>;
pub type Network = network::Network<f64>;
pub type Network32 = network::Network<f32>;
pub type Attribution = attribution::Attribution<f64>;
pub type Dataset = data::Dataset<f64>;


