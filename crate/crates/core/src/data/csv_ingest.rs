use std::path::Path;

use sha2::{Digest, Sha256};

use super::{Dataset, Provenance};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Reads a headed numeric CSV; `label_column` holds integer class labels
/// and every other column becomes a feature.
pub fn ingest_csv<S: Scalar>(path: impl AsRef<Path>, label_column: &str) -> Result<Dataset<S>> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let bytes = std::fs::read(path)?;
    let digest = hex::encode(Sha256::digest(&bytes));

    let err = |line: u64, message: String| Error::Csv {
        path: shown.clone(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes.as_slice());
    let header = reader
        .headers()
        .map_err(|e| err(1, e.to_string()))?
        .clone();
    let label_idx = header
        .iter()
        .position(|h| h.trim() == label_column)
        .ok_or_else(|| err(1, format!("no label column {label_column:?}")))?;
    let names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != label_idx)
        .map(|(_, h)| h.trim().to_string())
        .collect();

    let mut data = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != header.len() {
            return Err(err(
                line,
                format!("expected {} fields, found {}", header.len(), record.len()),
            ));
        }
        for (i, cell) in record.iter().enumerate() {
            let cell = cell.trim();
            if i == label_idx {
                let label: usize = cell
                    .parse()
                    .map_err(|_| err(line, format!("label {cell:?} is not a class index")))?;
                labels.push(label);
                continue;
            }
            let value: f64 = cell.parse().map_err(|_| {
                err(line, format!("column {:?}: {cell:?} is not numeric", &header[i]))
            })?;
            if !value.is_finite() {
                return Err(err(line, format!("column {:?}: non-finite value", &header[i])));
            }
            data.push(S::of(value));
        }
    }
    let features = Tensor::new(&[labels.len(), names.len()], data)?;
    Dataset::new(
        features,
        labels,
        names,
        Provenance::File {
            path: shown,
            sha256: digest,
        },
    )
}
