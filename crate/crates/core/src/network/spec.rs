use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Two-slope piecewise-linear activations through the origin, plus identity.
///
/// Anything outside this family (sigmoid, tanh, ...) cannot be expressed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Activation {
    Relu,
    LeakyRelu { slope: f64 },
    /// Negative-side slope is a learnable parameter, initialized to `init`.
    Prelu { init: f64 },
    Identity,
}

/// Pooling functions that are linear or select by relative ordering.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pooling {
    Max,
    Min,
    Average,
    /// Mean over all positions of each channel; only as the last spatial reduction.
    GlobalAverage,
    Identity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LayerSpec {
    Dense {
        units: usize,
        has_bias: bool,
    },
    /// Valid (unpadded) 1-D convolution over a position-major signal.
    Conv1d {
        out_channels: usize,
        kernel: usize,
        #[serde(default = "one")]
        stride: usize,
        has_bias: bool,
    },
    Activation {
        activation_kind: Activation,
    },
    Pooling {
        pooling_kind: Pooling,
        #[serde(default = "one")]
        pool_window: usize,
    },
    /// Adds the output of an earlier layer to the current activation.
    SkipMerge {
        from: usize,
    },
}

fn one() -> usize {
    1
}

impl LayerSpec {
    pub fn dense(units: usize, has_bias: bool) -> Self {
        LayerSpec::Dense { units, has_bias }
    }

    pub fn relu() -> Self {
        LayerSpec::Activation {
            activation_kind: Activation::Relu,
        }
    }

    pub fn activation(kind: Activation) -> Self {
        LayerSpec::Activation {
            activation_kind: kind,
        }
    }

    pub fn pool(kind: Pooling, window: usize) -> Self {
        LayerSpec::Pooling {
            pooling_kind: kind,
            pool_window: window,
        }
    }

    pub fn has_bias(&self) -> bool {
        matches!(
            self,
            LayerSpec::Dense { has_bias: true, .. } | LayerSpec::Conv1d { has_bias: true, .. }
        )
    }

    pub(crate) fn without_bias(&self) -> Self {
        let mut l = self.clone();
        match &mut l {
            LayerSpec::Dense { has_bias, .. } | LayerSpec::Conv1d { has_bias, .. } => {
                *has_bias = false
            }
            _ => {}
        }
        l
    }
}

/// Signal layout between layers: `length` positions of `channels` values,
/// stored position-major.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Geometry {
    pub length: usize,
    pub channels: usize,
}

impl Geometry {
    pub fn features(&self) -> usize {
        self.length * self.channels
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub input_dim: usize,
    #[serde(default = "one")]
    pub input_channels: usize,
    pub output_dim: usize,
    pub layers: Vec<LayerSpec>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Homogeneity {
    Homogeneous,
    NonHomogeneous(Vec<String>),
}

impl Homogeneity {
    pub fn is_homogeneous(&self) -> bool {
        matches!(self, Homogeneity::Homogeneous)
    }

    pub fn and(self, other: Homogeneity) -> Homogeneity {
        match (self, other) {
            (Homogeneity::Homogeneous, Homogeneity::Homogeneous) => Homogeneity::Homogeneous,
            (Homogeneity::NonHomogeneous(mut a), Homogeneity::NonHomogeneous(b)) => {
                a.extend(b);
                Homogeneity::NonHomogeneous(a)
            }
            (Homogeneity::NonHomogeneous(a), _) | (_, Homogeneity::NonHomogeneous(a)) => {
                Homogeneity::NonHomogeneous(a)
            }
        }
    }
}

impl NetworkSpec {
    /// A ReLU MLP: `input -> hidden... -> output`, with the given bias setting.
    pub fn mlp(input_dim: usize, hidden: &[usize], output_dim: usize, has_bias: bool) -> Self {
        let mut layers = Vec::new();
        for &h in hidden {
            layers.push(LayerSpec::dense(h, has_bias));
            layers.push(LayerSpec::relu());
        }
        layers.push(LayerSpec::dense(output_dim, has_bias));
        Self {
            input_dim,
            input_channels: 1,
            output_dim,
            layers,
        }
    }

    pub fn input_geometry(&self) -> Geometry {
        Geometry {
            length: self.input_dim / self.input_channels.max(1),
            channels: self.input_channels,
        }
    }

    /// Checks that the layers compose and returns the geometry after each one.
    pub fn validate(&self) -> Result<Vec<Geometry>> {
        let bad = |i: usize, msg: String| Error::InvalidSpec(format!("layer {i}: {msg}"));
        if self.input_dim == 0 || self.output_dim == 0 {
            return Err(Error::InvalidSpec("input and output dims must be positive".into()));
        }
        if self.input_channels == 0 || self.input_dim % self.input_channels != 0 {
            return Err(Error::InvalidSpec(format!(
                "input_dim {} is not a multiple of input_channels {}",
                self.input_dim, self.input_channels
            )));
        }
        let mut geo = self.input_geometry();
        let mut out = Vec::with_capacity(self.layers.len());
        let mut reduced = false;
        for (i, layer) in self.layers.iter().enumerate() {
            geo = match layer {
                LayerSpec::Dense { units, .. } => {
                    if *units == 0 {
                        return Err(bad(i, "dense layer needs at least one unit".into()));
                    }
                    // dense output is a fresh feature vector, not a spatial signal
                    reduced = false;
                    Geometry {
                        length: *units,
                        channels: 1,
                    }
                }
                LayerSpec::Conv1d {
                    out_channels,
                    kernel,
                    stride,
                    ..
                } => {
                    if reduced {
                        return Err(bad(i, "convolution after global-average pooling".into()));
                    }
                    if *out_channels == 0 || *kernel == 0 || *stride == 0 {
                        return Err(bad(i, "conv1d sizes must be positive".into()));
                    }
                    if *kernel > geo.length {
                        return Err(bad(
                            i,
                            format!("kernel {kernel} longer than signal {}", geo.length),
                        ));
                    }
                    Geometry {
                        length: (geo.length - kernel) / stride + 1,
                        channels: *out_channels,
                    }
                }
                LayerSpec::Activation { activation_kind } => {
                    if let Activation::LeakyRelu { slope } | Activation::Prelu { init: slope } =
                        activation_kind
                    {
                        if !slope.is_finite() {
                            return Err(bad(i, "activation slope must be finite".into()));
                        }
                    }
                    geo
                }
                LayerSpec::Pooling {
                    pooling_kind,
                    pool_window,
                } => match pooling_kind {
                    Pooling::Identity => geo,
                    Pooling::GlobalAverage => {
                        if reduced {
                            return Err(bad(i, "repeated global-average pooling".into()));
                        }
                        reduced = true;
                        Geometry {
                            length: 1,
                            channels: geo.channels,
                        }
                    }
                    _ => {
                        if reduced {
                            return Err(bad(i, "pooling after global-average pooling".into()));
                        }
                        if *pool_window == 0 || geo.length % pool_window != 0 {
                            return Err(bad(
                                i,
                                format!(
                                    "pool window {pool_window} does not divide length {}",
                                    geo.length
                                ),
                            ));
                        }
                        Geometry {
                            length: geo.length / pool_window,
                            channels: geo.channels,
                        }
                    }
                },
                LayerSpec::SkipMerge { from } => {
                    if *from >= i {
                        return Err(bad(i, format!("skip source {from} is not an earlier layer")));
                    }
                    if out[*from] != geo {
                        return Err(bad(
                            i,
                            format!("skip source {from} shape {:?} differs from {:?}", out[*from], geo),
                        ));
                    }
                    geo
                }
            };
            out.push(geo);
        }
        if geo.features() != self.output_dim {
            return Err(Error::InvalidSpec(format!(
                "last layer yields {} features, output_dim is {}",
                geo.features(),
                self.output_dim
            )));
        }
        Ok(out)
    }

    /// Structural nonnegative homogeneity: every activation and pooling kind
    /// is in the admissible family by construction, so only biases break it.
    pub fn classify_homogeneity(&self) -> Homogeneity {
        let reasons: Vec<String> = self
            .layers
            .iter()
            .enumerate()
            .filter(|(_, l)| l.has_bias())
            .map(|(i, _)| format!("bias at layer {i}"))
            .collect();
        if reasons.is_empty() {
            Homogeneity::Homogeneous
        } else {
            Homogeneity::NonHomogeneous(reasons)
        }
    }

    pub fn without_bias(&self) -> Self {
        Self {
            layers: self.layers.iter().map(LayerSpec::without_bias).collect(),
            ..self.clone()
        }
    }
}
