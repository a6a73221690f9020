use super::{Order, Tape, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Central differences of `root` with respect to every element of `leaf`,
/// obtained by replaying the recorded graph. The leaf value is restored.
pub fn finite_difference_gradient<S: Scalar>(
    tape: &Tape<S>,
    root: Var<'_, S>,
    leaf: Var<'_, S>,
    step: S,
) -> Result<Tensor<S>> {
    if !(step > S::zero()) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {step}")));
    }
    let original = (*leaf.value()).clone();
    let two = S::one() + S::one();
    let mut out = Tensor::zeros(original.shape());
    for i in 0..original.len() {
        let mut plus = original.clone();
        plus.data_mut()[i] = original.data()[i] + step;
        tape.set_value(leaf, plus)?;
        let f_plus = tape.recompute(root)?.sum();
        let mut minus = original.clone();
        minus.data_mut()[i] = original.data()[i] - step;
        tape.set_value(leaf, minus)?;
        let f_minus = tape.recompute(root)?.sum();
        out.data_mut()[i] = (f_plus - f_minus) / (two * step);
    }
    tape.set_value(leaf, original)?;
    tape.recompute(root)?;
    Ok(out)
}

/// Largest elementwise deviation between the reverse-mode gradient of `root`
/// with respect to `leaf` and central finite differences.
pub fn gradient_check<S: Scalar>(
    tape: &Tape<S>,
    root: Var<'_, S>,
    leaf: Var<'_, S>,
    step: S,
) -> Result<S> {
    let analytic = tape.gradient(root, &[leaf], Order::First)?;
    let analytic = (*analytic[0].value()).clone();
    let numeric = finite_difference_gradient(tape, root, leaf, step)?;
    Ok(analytic.max_abs_diff(&numeric))
}
