use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::train::{positive_scores, train};
use super::{roc_auc, PriorConfig, PriorMethod, TrainConfig};
use crate::data::{generate_synthetic, Dataset, Encoding, GeneratorSpec};
use crate::error::{Error, Result};
use crate::network::{Network, NetworkSpec};
use crate::rng;
use crate::scalar::Scalar;

/// One configuration compared in a subsampling experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentArm {
    pub label: String,
    pub spec: NetworkSpec,
    pub prior: Option<PriorConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub config: String,
    pub repeat: usize,
    pub roc_auc: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigSummary {
    pub config: String,
    pub runs: usize,
    pub mean: f64,
    pub sem: f64,
    pub two_sem: f64,
}

impl ConfigSummary {
    pub fn lower(&self) -> f64 {
        self.mean - self.two_sem
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.two_sem
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub rows: Vec<ExperimentRow>,
    pub configs: Vec<ConfigSummary>,
}

impl ExperimentSummary {
    pub fn config(&self, label: &str) -> Option<&ConfigSummary> {
        self.configs.iter().find(|c| c.config == label)
    }
}

/// Repeatedly draws disjoint train and validation subsets of `train_size`
/// and `validation_size` rows, trains every arm on the same split, and
/// records validation ROC-AUC.
///
/// Within a repeat all arms share one initialization seed and one batch
/// order so that differences between arms are paired.
pub fn subsample_experiment<S: Scalar>(
    data: &Dataset<S>,
    repeats: usize,
    train_size: usize,
    validation_size: usize,
    arms: &[ExperimentArm],
    tc: &TrainConfig,
    seed: u64,
) -> Result<ExperimentSummary> {
    tc.validate()?;
    let drawn = train_size + validation_size;
    if drawn > data.len() || train_size == 0 || validation_size == 0 {
        return Err(Error::InvalidArgument(format!(
            "cannot draw {train_size} training and {validation_size} validation rows from {}",
            data.len()
        )));
    }
    for arm in arms {
        arm.spec.validate()?;
        if let Some(pc) = &arm.prior {
            pc.validate(&arm.spec.classify_homogeneity(), data.n_features())?;
        }
    }

    let jobs: Vec<(usize, usize)> = (0..repeats)
        .flat_map(|r| (0..arms.len()).map(move |a| (r, a)))
        .collect();
    let results: Vec<Result<ExperimentRow>> = jobs
        .par_iter()
        .map(|&(repeat, a)| {
            let arm = &arms[a];
            let mut split = rng::stream(seed, &[rng::tag("split"), repeat as u64]);
            let mut idx: Vec<usize> = (0..data.len()).collect();
            idx.partial_shuffle(&mut split, drawn);
            let train_set = data.subset(&idx[..train_size])?;
            let val_set = data.subset(&idx[train_size..drawn])?;

            let run_seed = rng::derive_seed(seed, &[rng::tag("run"), repeat as u64]);
            let net = Network::<S>::init(arm.spec.clone(), run_seed)?;
            let cfg = TrainConfig {
                seed: run_seed,
                ..tc.clone()
            };
            let out = train(&net, &train_set, &cfg, arm.prior.as_ref(), None)?;
            let scores = positive_scores(&out.network, val_set.features())?;
            Ok(ExperimentRow {
                config: arm.label.clone(),
                repeat,
                roc_auc: roc_auc(&scores, val_set.labels())?,
            })
        })
        .collect();
    let rows = results.into_iter().collect::<Result<Vec<_>>>()?;

    let configs = arms
        .iter()
        .map(|arm| {
            let values: Vec<f64> = rows
                .iter()
                .filter(|r| r.config == arm.label)
                .map(|r| r.roc_auc)
                .collect();
            summarize(&arm.label, &values)
        })
        .collect();
    Ok(ExperimentSummary { rows, configs })
}

fn summarize(label: &str, values: &[f64]) -> ConfigSummary {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let sem = if values.len() > 1 {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
        (var / k).sqrt()
    } else {
        0.0
    };
    ConfigSummary {
        config: label.to_string(),
        runs: values.len(),
        mean,
        sem,
        two_sem: 2.0 * sem,
    }
}

pub const UNREGULARIZED_BIASED: &str = "unregularized-biased";
pub const UNREGULARIZED_BIAS_FREE: &str = "unregularized-bias-free";

/// The sparsity benchmark: every prior arm against unregularized biased and
/// bias-free networks on subsampled synthetic data.
///
/// X-Gradient arms use the bias-free network; every other arm uses biases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SparsityBench {
    pub generator: GeneratorSpec,
    pub data_seed: u64,
    pub repeats: usize,
    pub train_size: usize,
    pub validation_size: usize,
    pub hidden: Vec<usize>,
    pub lambda: f64,
    pub eg_references: Vec<usize>,
    pub include_rrr: bool,
    pub train: TrainConfig,
    pub seed: u64,
}

impl Default for SparsityBench {
    fn default() -> Self {
        Self {
            generator: GeneratorSpec {
                encoding: Encoding::OneHot,
                shift: 0.3,
                ..GeneratorSpec::default()
            },
            data_seed: 1,
            repeats: 50,
            train_size: 100,
            validation_size: 2000,
            hidden: vec![32],
            lambda: 0.01,
            eg_references: vec![1, 4, 16, 32],
            include_rrr: false,
            train: TrainConfig {
                epochs: 30,
                batch_size: 20,
                learning_rate: 1e-2,
                ..TrainConfig::default()
            },
            seed: 42,
        }
    }
}

impl SparsityBench {
    pub fn eg_label(references: usize) -> String {
        format!("eg{references}")
    }

    pub fn arms(&self) -> Vec<ExperimentArm> {
        let n = self.generator.n_features;
        let free = NetworkSpec::mlp(n, &self.hidden, 1, false);
        let biased = NetworkSpec::mlp(n, &self.hidden, 1, true);
        let arm = |label: String, spec: &NetworkSpec, method: Option<PriorMethod>| ExperimentArm {
            label,
            spec: spec.clone(),
            prior: method.map(|m| PriorConfig::gini(m, self.lambda)),
        };
        let mut arms = vec![
            arm(UNREGULARIZED_BIASED.into(), &biased, None),
            arm(UNREGULARIZED_BIAS_FREE.into(), &free, None),
            arm("xg".into(), &free, Some(PriorMethod::Xg)),
            arm("grad".into(), &biased, Some(PriorMethod::Grad)),
        ];
        if self.include_rrr {
            arms.push(arm("rrr".into(), &biased, Some(PriorMethod::Rrr)));
        }
        for &k in &self.eg_references {
            arms.push(arm(Self::eg_label(k), &biased, Some(PriorMethod::Eg { references: k })));
        }
        arms
    }

    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        self.train.validate()?;
        if self.repeats == 0 {
            return Err(Error::InvalidArgument("repeats must be at least 1".into()));
        }
        if self.eg_references.contains(&0) {
            return Err(Error::EmptyReferences);
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda must be nonnegative, got {}", self.lambda)));
        }
        Ok(())
    }

    pub fn run(&self) -> Result<ExperimentSummary> {
        self.validate()?;
        let data = generate_synthetic::<f64>(&self.generator, self.data_seed)?;
        subsample_experiment(
            &data,
            self.repeats,
            self.train_size,
            self.validation_size,
            &self.arms(),
            &self.train,
            self.seed,
        )
    }
}
