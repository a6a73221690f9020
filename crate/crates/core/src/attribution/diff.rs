use super::Attribution;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Reference magnitudes below this are left out of the relative difference.
pub const REL_DIFF_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelDiff {
    /// Mean of `|a_i - b_i| / |a_i|` over the counted terms.
    pub value: f64,
    pub counted: usize,
    pub skipped: usize,
}

/// Mean absolute relative difference, with `reference` in the denominator.
pub fn mean_abs_rel_diff<S: Scalar>(
    reference: &[Attribution<S>],
    other: &[Attribution<S>],
) -> Result<RelDiff> {
    if reference.len() != other.len() {
        return Err(Error::InvalidArgument(format!(
            "{} reference attributions vs {}",
            reference.len(),
            other.len()
        )));
    }
    let mut acc = Accum::default();
    for (a, b) in reference.iter().zip(other) {
        acc.add(&a.values, &b.values)?;
    }
    Ok(acc.finish())
}

/// Same as [`mean_abs_rel_diff`] over the rows of two equally shaped tensors.
pub fn mean_abs_rel_diff_rows<S: Scalar>(reference: &Tensor<S>, other: &Tensor<S>) -> Result<RelDiff> {
    let mut acc = Accum::default();
    acc.add(reference, other)?;
    Ok(acc.finish())
}

#[derive(Default)]
struct Accum {
    sum: f64,
    counted: usize,
    skipped: usize,
}

impl Accum {
    fn add<S: Scalar>(&mut self, a: &Tensor<S>, b: &Tensor<S>) -> Result<()> {
        if a.shape() != b.shape() {
            return Err(Error::InvalidArgument(format!(
                "attribution shapes differ: {:?} vs {:?}",
                a.shape(),
                b.shape()
            )));
        }
        for (&x, &y) in a.data().iter().zip(b.data()) {
            let (x, y) = (x.as_f64(), y.as_f64());
            if x.abs() < REL_DIFF_EPS {
                self.skipped += 1;
            } else {
                self.sum += (x - y).abs() / x.abs();
                self.counted += 1;
            }
        }
        Ok(())
    }

    fn finish(self) -> RelDiff {
        RelDiff {
            value: if self.counted == 0 { 0.0 } else { self.sum / self.counted as f64 },
            counted: self.counted,
            skipped: self.skipped,
        }
    }
}
