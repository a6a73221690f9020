use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{evaluate_metric, Metric, MetricInput, MetricResult};
use crate::attribution::{attribute_batch, BatchOptions, MethodChoice};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub method: String,
    /// One result per metric, in `Metric::ALL` order; `None` when the method
    /// is not applicable to the model.
    pub results: Option<Vec<MetricResult>>,
    pub note: Option<String>,
}

impl BenchmarkRow {
    pub fn result(&self, metric: Metric) -> Option<&MetricResult> {
        self.results.as_ref()?.iter().find(|r| r.metric == metric)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkTable {
    pub fractions: Vec<f64>,
    pub rows: Vec<BenchmarkRow>,
}

impl BenchmarkTable {
    pub fn row(&self, method: &str) -> Option<&BenchmarkRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    /// Long-format CSV with columns `metric,method,fraction,value`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(["metric", "method", "fraction", "value"]).map_err(csv_err)?;
        for row in &self.rows {
            for r in row.results.iter().flatten() {
                for (f, v) in &r.curve {
                    w.write_record([r.metric.to_string(), row.method.clone(), f.to_string(), v.to_string()])
                        .map_err(csv_err)?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// One line per method with the area under each curve.
    pub fn to_text(&self) -> String {
        let width = self.rows.iter().map(|r| r.method.len()).max().unwrap_or(6).max(6);
        let mut s = format!("{:<width$}", "method");
        for m in Metric::ALL {
            let arrow = if m.higher_is_better() { "↑" } else { "↓" };
            let _ = write!(s, " {:>10}", format!("{m} {arrow}"));
        }
        s.push('\n');
        for row in &self.rows {
            let _ = write!(s, "{:<width$}", row.method);
            for m in Metric::ALL {
                match row.result(m) {
                    Some(r) => {
                        let _ = write!(s, " {:>10.4}", r.auc);
                    }
                    None => {
                        let _ = write!(s, " {:>10}", "N/A");
                    }
                }
            }
            s.push('\n');
        }
        s
    }
}

/// Every metric for every method; methods the model cannot support (X-Gradient
/// on a non-homogeneous network) get an N/A row.
pub fn benchmark_table<S: Scalar>(
    input: &MetricInput<'_, S>,
    methods: &[MethodChoice],
    options: &BatchOptions<S>,
    fractions: &[f64],
) -> Result<BenchmarkTable> {
    let mut rows = Vec::with_capacity(methods.len());
    for &choice in methods {
        let label = choice.to_string();
        let attributions = match attribute_batch(input.model, input.inputs, input.targets, choice, options) {
            Ok(a) => a,
            Err(Error::NotHomogeneous(reasons)) => {
                rows.push(BenchmarkRow {
                    method: label,
                    results: None,
                    note: Some(format!("not homogeneous: {}", reasons.join("; "))),
                });
                continue;
            }
            Err(e) => return Err(e),
        };
        let results = Metric::ALL
            .iter()
            .map(|&m| evaluate_metric(input, &attributions, &label, m, fractions))
            .collect::<Result<Vec<_>>>()?;
        rows.push(BenchmarkRow {
            method: label,
            results: Some(results),
            note: None,
        });
    }
    Ok(BenchmarkTable {
        fractions: fractions.to_vec(),
        rows,
    })
}
