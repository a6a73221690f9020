use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch at node {node} ({op}): {detail}")]
    ShapeMismatch {
        node: usize,
        op: &'static str,
        detail: String,
    },

    #[error("invalid tensor: {0}")]
    InvalidTensor(String),

    #[error("gradient output must be a scalar, got shape {0:?}")]
    NonScalarOutput(Vec<usize>),

    #[error("gradient order {0} is not supported (only 1 and 2)")]
    UnsupportedOrder(u8),

    #[error("variable belongs to a different tape")]
    ForeignVar,

    #[error("invalid network spec: {0}")]
    InvalidSpec(String),

    #[error("X-Gradient is only defined for homogeneous networks: {}", .0.join("; "))]
    NotHomogeneous(Vec<String>),

    #[error("target index {target} out of range for {outputs} outputs")]
    InvalidTarget { target: usize, outputs: usize },

    #[error("degree-{degree} homogeneity probe failed: relative error {error:e} at alpha {alpha}")]
    HomogeneityProbeFailed { degree: f64, alpha: f64, error: f64 },

    #[error("log-gradient needs a positive logit, got {0}; use the stabilized form")]
    NonPositiveLogit(f64),

    #[error("expected gradients needs at least one reference")]
    EmptyReferences,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Divergence { epoch: usize, loss: f64, trace: Vec<f64> },

    #[error("ROC-AUC needs both classes present")]
    SingleClass,

    #[error("{path}: line {line}: {message}")]
    Csv {
        path: String,
        line: u64,
        message: String,
    },

    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
