//! Tabular datasets: CSV ingest and a seeded synthetic generator.

mod csv_ingest;
mod synthetic;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub use csv_ingest::ingest_csv;
pub use synthetic::{generate_synthetic, Encoding, GeneratorSpec};

/// Where a dataset came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Provenance {
    Generator { spec: GeneratorSpec, seed: u64 },
    File { path: String, sha256: String },
    Derived { parent: Box<Provenance>, note: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<S: Scalar> {
    features: Tensor<S>,
    labels: Vec<usize>,
    feature_names: Vec<String>,
    provenance: Provenance,
}

impl<S: Scalar> Dataset<S> {
    pub fn new(
        features: Tensor<S>,
        labels: Vec<usize>,
        feature_names: Vec<String>,
        provenance: Provenance,
    ) -> Result<Self> {
        if features.rank() != 2 {
            return Err(Error::InvalidArgument(format!(
                "features must be [N, n], got {:?}",
                features.shape()
            )));
        }
        let (rows, cols) = (features.shape()[0], features.shape()[1]);
        if labels.len() != rows {
            return Err(Error::InvalidArgument(format!(
                "{} labels for {rows} rows",
                labels.len()
            )));
        }
        if feature_names.len() != cols {
            return Err(Error::InvalidArgument(format!(
                "{} feature names for {cols} columns",
                feature_names.len()
            )));
        }
        Ok(Self {
            features,
            labels,
            feature_names,
            provenance,
        })
    }

    pub fn features(&self) -> &Tensor<S> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// One more than the largest label.
    pub fn n_classes(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let n = self.n_features();
        let mut data = Vec::with_capacity(indices.len() * n);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::InvalidArgument(format!(
                    "row {i} out of range for {} rows",
                    self.len()
                )));
            }
            data.extend_from_slice(&self.features.data()[i * n..(i + 1) * n]);
            labels.push(self.labels[i]);
        }
        Ok(Self {
            features: Tensor::from_parts(vec![indices.len(), n], data),
            labels,
            feature_names: self.feature_names.clone(),
            provenance: Provenance::Derived {
                parent: Box::new(self.provenance.clone()),
                note: format!("subset of {} rows", indices.len()),
            },
        })
    }

    pub fn column_means(&self) -> Tensor<S> {
        let n = self.n_features();
        let mut means = vec![S::zero(); n];
        for row in self.features.data().chunks(n) {
            for (m, &v) in means.iter_mut().zip(row) {
                *m = *m + v;
            }
        }
        let count = S::of(self.len().max(1) as f64);
        Tensor::vector(means.into_iter().map(|m| m / count).collect())
    }

    pub fn cast<T: Scalar>(&self) -> Dataset<T> {
        Dataset {
            features: self.features.cast(),
            labels: self.labels.clone(),
            feature_names: self.feature_names.clone(),
            provenance: self.provenance.clone(),
        }
    }
}
