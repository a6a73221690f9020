use std::sync::Arc;

use super::{Indices, Node, Op, SelectMode};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

type Evaluated<S> = (Tensor<S>, Option<Arc<[usize]>>);

pub(crate) fn is_suffix(short: &[usize], long: &[usize]) -> bool {
    short.len() <= long.len() && long[long.len() - short.len()..] == *short
}

/// Result shape of a suffix-broadcast binary op, if the shapes are compatible.
pub(crate) fn broadcast_shape(a: &[usize], b: &[usize]) -> Option<Vec<usize>> {
    if is_suffix(b, a) {
        Some(a.to_vec())
    } else if is_suffix(a, b) {
        Some(b.to_vec())
    } else {
        None
    }
}

fn mismatch(node: usize, op: &'static str, detail: String) -> Error {
    Error::ShapeMismatch { node, op, detail }
}

fn binary<S: Scalar>(
    id: usize,
    name: &'static str,
    a: &Tensor<S>,
    b: &Tensor<S>,
    f: impl Fn(S, S) -> S,
) -> Result<Tensor<S>> {
    let shape = broadcast_shape(a.shape(), b.shape()).ok_or_else(|| {
        mismatch(
            id,
            name,
            format!("cannot broadcast {:?} with {:?}", a.shape(), b.shape()),
        )
    })?;
    let (ad, bd) = (a.data(), b.data());
    let n: usize = shape.iter().product();
    let data = if ad.len() == bd.len() {
        ad.iter().zip(bd).map(|(&x, &y)| f(x, y)).collect()
    } else {
        let (la, lb) = (ad.len(), bd.len());
        (0..n).map(|i| f(ad[i % la], bd[i % lb])).collect()
    };
    Ok(Tensor::from_parts(shape, data))
}

fn resolve<'a, S>(
    idx: &'a Indices,
    nodes: &'a [Node<S>],
    id: usize,
) -> Result<&'a [usize]> {
    match idx {
        Indices::Fixed(v) => Ok(v),
        Indices::Selected(pool) => nodes[*pool]
            .selected
            .as_deref()
            .ok_or_else(|| mismatch(id, "scatter", format!("node {pool} selected nothing"))),
    }
}

pub(crate) fn eval<S: Scalar>(
    op: &Op<S>,
    inputs: &[&Tensor<S>],
    nodes: &[Node<S>],
    id: usize,
) -> Result<Evaluated<S>> {
    let out = match op {
        Op::Leaf => unreachable!("leaves are never evaluated"),
        Op::MatMul { ta, tb } => matmul(id, inputs[0], inputs[1], *ta, *tb)?,
        Op::Reshape(shape) => inputs[0].reshape(shape).map_err(|_| {
            mismatch(
                id,
                "reshape",
                format!("{:?} into {:?}", inputs[0].shape(), shape),
            )
        })?,
        Op::Add => binary(id, "add", inputs[0], inputs[1], |x, y| x + y)?,
        Op::Sub => binary(id, "sub", inputs[0], inputs[1], |x, y| x - y)?,
        Op::Mul => binary(id, "mul", inputs[0], inputs[1], |x, y| x * y)?,
        Op::BroadcastTo(shape) => {
            let a = inputs[0];
            if !is_suffix(a.shape(), shape) {
                return Err(mismatch(
                    id,
                    "broadcast",
                    format!("{:?} is not a suffix of {:?}", a.shape(), shape),
                ));
            }
            let n: usize = shape.iter().product();
            let d = a.data();
            Tensor::from_parts(shape.clone(), (0..n).map(|i| d[i % d.len()]).collect())
        }
        Op::SumTo(shape) => {
            let a = inputs[0];
            if !is_suffix(shape, a.shape()) {
                return Err(mismatch(
                    id,
                    "sum",
                    format!("{:?} is not a suffix of {:?}", shape, a.shape()),
                ));
            }
            let n: usize = shape.iter().product();
            let mut out = vec![S::zero(); n];
            for chunk in a.data().chunks(n.max(1)) {
                for (o, &v) in out.iter_mut().zip(chunk) {
                    *o = *o + v;
                }
            }
            Tensor::from_parts(shape.clone(), out)
        }
        Op::Scale(c) => inputs[0].scale(*c),
        Op::Piecewise { pos, neg } => inputs[0].map(|z| {
            if z > S::zero() {
                *pos * z
            } else {
                *neg * z
            }
        }),
        Op::Mask { pos, neg, zero } => inputs[0].map(|z| {
            if z > S::zero() {
                *pos
            } else if z < S::zero() {
                *neg
            } else {
                *zero
            }
        }),
        Op::Abs => inputs[0].map(|z| z.abs()),
        Op::Log => inputs[0].map(|z| z.ln()),
        Op::Exp => inputs[0].map(|z| z.exp()),
        Op::Recip => inputs[0].map(|z| z.recip()),
        Op::Square => inputs[0].map(|z| z * z),
        Op::Gather(idx, shape) => {
            let idx = resolve(idx, nodes, id)?;
            let src = inputs[0].data();
            let n: usize = shape.iter().product();
            if idx.len() != n {
                return Err(mismatch(
                    id,
                    "gather",
                    format!("{} indices for output {:?}", idx.len(), shape),
                ));
            }
            let mut out = Vec::with_capacity(n);
            for &i in idx {
                out.push(*src.get(i).ok_or_else(|| {
                    mismatch(id, "gather", format!("index {i} outside {} values", src.len()))
                })?);
            }
            Tensor::from_parts(shape.clone(), out)
        }
        Op::Scatter(idx, shape) => {
            let idx = resolve(idx, nodes, id)?;
            let src = inputs[0].data();
            if idx.len() != src.len() {
                return Err(mismatch(
                    id,
                    "scatter",
                    format!("{} indices for {} values", idx.len(), src.len()),
                ));
            }
            let mut out = vec![S::zero(); shape.iter().product()];
            for (&i, &v) in idx.iter().zip(src) {
                let slot = out.get_mut(i).ok_or_else(|| {
                    mismatch(id, "scatter", format!("index {i} outside {:?}", shape))
                })?;
                *slot = *slot + v;
            }
            Tensor::from_parts(shape.clone(), out)
        }
        Op::SelectPool { groups, mode } => return select_pool(id, inputs[0], groups, *mode),
    };
    Ok((out, None))
}

fn matmul<S: Scalar>(
    id: usize,
    a: &Tensor<S>,
    b: &Tensor<S>,
    ta: bool,
    tb: bool,
) -> Result<Tensor<S>> {
    if a.rank() != 2 || b.rank() != 2 {
        return Err(mismatch(
            id,
            "matmul",
            format!("operands must be matrices, got {:?} and {:?}", a.shape(), b.shape()),
        ));
    }
    let (ra, ca) = (a.shape()[0], a.shape()[1]);
    let (rb, cb) = (b.shape()[0], b.shape()[1]);
    let (m, k, rsa, csa) = if ta {
        (ca, ra, 1isize, ca as isize)
    } else {
        (ra, ca, ca as isize, 1isize)
    };
    let (k2, n, rsb, csb) = if tb {
        (cb, rb, 1isize, cb as isize)
    } else {
        (rb, cb, cb as isize, 1isize)
    };
    if k != k2 {
        return Err(mismatch(
            id,
            "matmul",
            format!(
                "inner dimensions differ: {:?}{} x {:?}{}",
                a.shape(),
                if ta { "^T" } else { "" },
                b.shape(),
                if tb { "^T" } else { "" }
            ),
        ));
    }
    let mut out = vec![S::zero(); m * n];
    if m > 0 && n > 0 && k > 0 {
        // SAFETY: strides describe the row-major buffers checked above and
        // `out` is a fresh allocation of m * n elements.
        unsafe {
            S::gemm(
                m,
                k,
                n,
                S::one(),
                a.data().as_ptr(),
                rsa,
                csa,
                b.data().as_ptr(),
                rsb,
                csb,
                S::zero(),
                out.as_mut_ptr(),
                n as isize,
                1,
            );
        }
    }
    Ok(Tensor::from_parts(vec![m, n], out))
}

fn select_pool<S: Scalar>(
    id: usize,
    a: &Tensor<S>,
    groups: &[Vec<usize>],
    mode: SelectMode,
) -> Result<Evaluated<S>> {
    let (rows, n) = match a.rank() {
        1 => (1, a.shape()[0]),
        2 => (a.shape()[0], a.shape()[1]),
        _ => {
            return Err(mismatch(
                id,
                "select-pool",
                format!("expected rank 1 or 2, got {:?}", a.shape()),
            ))
        }
    };
    if let Some(&bad) = groups.iter().flatten().find(|&&i| i >= n) {
        return Err(mismatch(
            id,
            "select-pool",
            format!("group index {bad} outside {n} features"),
        ));
    }
    let data = a.data();
    let mut values = Vec::with_capacity(rows * groups.len());
    let mut selected = Vec::with_capacity(rows * groups.len());
    for r in 0..rows {
        let row = &data[r * n..(r + 1) * n];
        for g in groups {
            let mut best = g[0];
            for &i in &g[1..] {
                let better = match mode {
                    SelectMode::Max => row[i] > row[best],
                    SelectMode::Min => row[i] < row[best],
                };
                if better {
                    best = i;
                }
            }
            values.push(row[best]);
            selected.push(r * n + best);
        }
    }
    let shape = if a.rank() == 1 {
        vec![groups.len()]
    } else {
        vec![rows, groups.len()]
    };
    Ok((Tensor::from_parts(shape, values), Some(selected.into())))
}
