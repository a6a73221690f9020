use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use xgrad::attribution::MethodChoice;
use xgrad::data::{generate_synthetic, ingest_csv, GeneratorSpec};
use xgrad::prior::PriorMethod;
use xgrad::{rng, Dataset, Network};

/// Failure classes, each with its own exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(String),
    Check(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Runtime(_) => 2,
            Failure::Check(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage: {m}"),
            Failure::Runtime(m) => write!(f, "{m}"),
            Failure::Check(m) => write!(f, "check failed: {m}"),
        }
    }
}

impl From<xgrad::Error> for Failure {
    fn from(e: xgrad::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

pub type Outcome<T = ()> = Result<T, Failure>;

/// Turns a library validation error into a usage error.
pub fn usage<T>(r: xgrad::Result<T>) -> Outcome<T> {
    r.map_err(|e| Failure::Usage(e.to_string()))
}

/// Reads a TOML config, or the defaults when no file is given.
pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Outcome<T> {
    let Some(path) = path else { return Ok(T::default()) };
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Failure::Usage(format!("config {}: {e}", path.display())))
}

pub fn to_toml<T: Serialize>(value: &T) -> Outcome<String> {
    toml::to_string(value).map_err(|e| Failure::Runtime(format!("cannot serialize config: {e}")))
}

pub fn require_file(path: &Path, what: &str) -> Outcome {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::Usage(format!("{what} {} is not a readable file", path.display())))
    }
}

/// Either a CSV file with a label column or the synthetic generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub csv: Option<PathBuf>,
    pub label_column: String,
    pub generator: GeneratorSpec,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            csv: None,
            label_column: "label".into(),
            generator: GeneratorSpec::default(),
        }
    }
}

impl DataConfig {
    pub fn validate(&self) -> Outcome {
        match &self.csv {
            Some(p) => require_file(p, "data file"),
            None => usage(self.generator.validate()),
        }
    }

    pub fn load(&self, seed: u64) -> Outcome<Dataset> {
        Ok(match &self.csv {
            Some(p) => ingest_csv(p, &self.label_column)?,
            None => generate_synthetic(&self.generator, seed)?,
        })
    }
}

pub fn parse_methods(names: &[String]) -> Outcome<Vec<MethodChoice>> {
    if names.is_empty() {
        return Err(Failure::Usage("no attribution methods given".into()));
    }
    names.iter().map(|n| usage(n.parse())).collect()
}

/// `grad`, `rrr`, `xg` or `eg<k>`.
pub fn parse_prior_method(s: &str) -> Outcome<PriorMethod> {
    match s.trim().to_ascii_lowercase().as_str() {
        "grad" => Ok(PriorMethod::Grad),
        "rrr" => Ok(PriorMethod::Rrr),
        "xg" => Ok(PriorMethod::Xg),
        other => other
            .strip_prefix("eg")
            .and_then(|k| k.parse().ok())
            .filter(|&k| k > 0)
            .map(|references| PriorMethod::Eg { references })
            .ok_or_else(|| Failure::Usage(format!("unknown prior method {s:?}"))),
    }
}

pub fn load_model(path: &Path) -> Outcome<Network> {
    Network::load(path).map_err(|e| Failure::Usage(format!("cannot load model {}: {e}", path.display())))
}

/// The first `rows` rows, or all of them.
pub fn head(data: &Dataset, rows: usize) -> Outcome<Dataset> {
    if data.len() <= rows {
        return Ok(data.clone());
    }
    Ok(data.subset(&(0..rows).collect::<Vec<_>>())?)
}

/// `count` distinct rows drawn with `seed`.
pub fn sample_rows(data: &Dataset, count: usize, seed: u64) -> Outcome<Dataset> {
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.shuffle(&mut rng::stream(seed, &[rng::tag("cli-sample")]));
    idx.truncate(count.max(1));
    Ok(data.subset(&idx)?)
}

/// Target logit per row: the only output, or the predicted class.
pub fn targets(model: &Network, data: &Dataset) -> Outcome<Vec<usize>> {
    if model.spec().output_dim == 1 {
        return Ok(vec![0; data.len()]);
    }
    let logits = model.predict(data.features())?;
    let k = model.spec().output_dim;
    Ok(logits
        .data()
        .chunks(k)
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
                .0
        })
        .collect())
}
