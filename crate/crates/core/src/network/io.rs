use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::Network;
use super::spec::NetworkSpec;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const FORMAT: &str = "xgrad-network";
pub const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ParamRecord {
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct NetworkFile {
    format: String,
    version: u32,
    spec: NetworkSpec,
    params: BTreeMap<String, ParamRecord>,
}

impl<S: Scalar> Network<S> {
    /// Versioned JSON; parameter values round-trip bit-exactly.
    pub fn to_json(&self) -> Result<String> {
        let file = NetworkFile {
            format: FORMAT.into(),
            version: VERSION,
            spec: self.spec().clone(),
            params: self
                .params()
                .iter()
                .map(|(k, t)| {
                    (
                        k.clone(),
                        ParamRecord {
                            shape: t.shape().to_vec(),
                            data: t.to_f64_vec(),
                        },
                    )
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: NetworkFile = serde_json::from_str(text)?;
        if file.format != FORMAT {
            return Err(Error::InvalidSpec(format!("unknown format {:?}", file.format)));
        }
        if file.version != VERSION {
            return Err(Error::InvalidSpec(format!(
                "unsupported network file version {}",
                file.version
            )));
        }
        let params = file
            .params
            .into_iter()
            .map(|(k, r)| Ok((k, Tensor::from_f64(&r.shape, &r.data)?)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        Network::from_parts(file.spec, params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

pub fn load_spec(path: &Path) -> Result<NetworkSpec> {
    let spec: NetworkSpec = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    spec.validate()?;
    Ok(spec)
}
