use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{Attribution, Baseline, Method};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Serializable form of one attribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributionRecord {
    pub input_id: usize,
    pub method: Method,
    pub target: usize,
    /// `None` for the zero baseline.
    pub baseline: Option<Vec<f64>>,
    pub steps: usize,
    pub values: Vec<f64>,
}

impl AttributionRecord {
    pub fn new<S: Scalar>(input_id: usize, a: &Attribution<S>) -> Self {
        Self {
            input_id,
            method: a.method,
            target: a.target,
            baseline: match &a.baseline {
                Baseline::Zero => None,
                Baseline::Tensor(t) => Some(t.to_f64_vec()),
            },
            steps: a.steps,
            values: a.values.to_f64_vec(),
        }
    }
}

/// One row per input: `input_id, method, target, f0 .. f{n-1}`.
pub fn write_csv<W: Write>(out: W, records: &[AttributionRecord]) -> Result<()> {
    let n = records.first().map_or(0, |r| r.values.len());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["input_id".to_string(), "method".into(), "target".into()];
    header.extend((0..n).map(|i| format!("f{i}")));
    w.write_record(&header).map_err(csv_err)?;
    for r in records {
        if r.values.len() != n {
            return Err(Error::InvalidArgument(format!(
                "record {} has {} values, expected {n}",
                r.input_id,
                r.values.len()
            )));
        }
        let mut row = vec![r.input_id.to_string(), r.method.label().into(), r.target.to_string()];
        row.extend(r.values.iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Csv {
        path: "<output>".into(),
        line: e.position().map_or(0, |p| p.line()),
        message: e.to_string(),
    }
}
