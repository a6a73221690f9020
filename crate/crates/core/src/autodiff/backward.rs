use super::{Indices, Op, Tape, Var};
use crate::error::Result;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Reverse sweep from `output` to `wrt`, built from recorded operations.
pub(super) fn run<'t, S: Scalar>(
    tape: &'t Tape<S>,
    output: usize,
    wrt: &[usize],
) -> Result<Vec<Var<'t, S>>> {
    // Nodes that both require a gradient and lead to one of the requested leaves.
    let leads = {
        let nodes = tape.nodes();
        let mut leads = vec![false; output + 1];
        for &w in wrt {
            if w <= output && nodes[w].requires_grad {
                leads[w] = true;
            }
        }
        for id in 0..=output {
            if !leads[id] && nodes[id].requires_grad {
                leads[id] = nodes[id].inputs.iter().any(|&i| leads[i]);
            }
        }
        leads
    };

    let mut grads: Vec<Option<Var<'t, S>>> = vec![None; output + 1];
    if leads[output] {
        let shape = tape.nodes()[output].value.shape().to_vec();
        grads[output] = Some(tape.constant(Tensor::ones(&shape)));
    }

    for id in (0..=output).rev() {
        let Some(g) = grads[id] else { continue };
        let (op, inputs) = {
            let nodes = tape.nodes();
            if matches!(nodes[id].op, Op::Leaf) {
                continue;
            }
            (nodes[id].op.clone(), nodes[id].inputs.clone())
        };
        let node = Var { tape, id };
        let ins: Vec<Var<'t, S>> = inputs.iter().map(|&i| Var { tape, id: i }).collect();
        let contributions = rule(&op, node, &ins, g)?;
        for (input, contribution) in inputs.iter().zip(contributions) {
            let Some(c) = contribution else { continue };
            if !leads[*input] {
                continue;
            }
            grads[*input] = Some(match grads[*input] {
                Some(acc) => acc.add(c)?,
                None => c,
            });
        }
    }

    Ok(wrt
        .iter()
        .map(|&w| match grads.get(w).copied().flatten() {
            Some(g) => g,
            None => {
                let shape = tape.nodes()[w].value.shape().to_vec();
                tape.constant(Tensor::zeros(&shape))
            }
        })
        .collect())
}

/// Vector-Jacobian products for one node, one entry per input.
fn rule<'t, S: Scalar>(
    op: &Op<S>,
    out: Var<'t, S>,
    ins: &[Var<'t, S>],
    g: Var<'t, S>,
) -> Result<Vec<Option<Var<'t, S>>>> {
    let two = S::one() + S::one();
    Ok(match op {
        Op::Leaf | Op::Mask { .. } => vec![None; ins.len()],
        Op::MatMul { ta, tb } => {
            let (a, b) = (ins[0], ins[1]);
            let (ta, tb) = (*ta, *tb);
            let da = if !ta {
                g.matmul_t(b, false, !tb)?
            } else {
                b.matmul_t(g, tb, true)?
            };
            let db = if !tb {
                a.matmul_t(g, !ta, false)?
            } else {
                g.matmul_t(a, true, ta)?
            };
            vec![Some(da), Some(db)]
        }
        Op::Reshape(_) => vec![Some(g.reshape(&ins[0].shape())?)],
        Op::Add => vec![
            Some(g.sum_to(&ins[0].shape())?),
            Some(g.sum_to(&ins[1].shape())?),
        ],
        Op::Sub => vec![
            Some(g.sum_to(&ins[0].shape())?),
            Some(g.neg().sum_to(&ins[1].shape())?),
        ],
        Op::Mul => {
            let (a, b) = (ins[0], ins[1]);
            vec![
                Some(g.mul(b)?.sum_to(&a.shape())?),
                Some(g.mul(a)?.sum_to(&b.shape())?),
            ]
        }
        Op::BroadcastTo(_) => vec![Some(g.sum_to(&ins[0].shape())?)],
        Op::SumTo(_) => vec![Some(g.broadcast_to(&ins[0].shape())?)],
        Op::Scale(c) => vec![Some(g.scale(*c))],
        Op::Piecewise { pos, neg } => {
            // derivative at exactly zero takes the non-positive branch
            let slope = ins[0].mask(*pos, *neg, *neg);
            vec![Some(g.mul(slope)?)]
        }
        Op::Abs => {
            let sign = ins[0].mask(S::one(), -S::one(), S::zero());
            vec![Some(g.mul(sign)?)]
        }
        Op::Log => vec![Some(g.mul(ins[0].recip())?)],
        Op::Exp => vec![Some(g.mul(out)?)],
        Op::Recip => vec![Some(g.mul(out.square().neg())?)],
        Op::Square => vec![Some(g.mul(ins[0].scale(two))?)],
        Op::Gather(idx, _) => {
            let shape = ins[0].shape();
            vec![Some(out.tape().push(
                Op::Scatter(idx.clone(), shape),
                vec![g.id],
            )?)]
        }
        Op::Scatter(idx, _) => {
            let shape = ins[0].shape();
            vec![Some(out.tape().push(
                Op::Gather(idx.clone(), shape),
                vec![g.id],
            )?)]
        }
        Op::SelectPool { .. } => {
            let shape = ins[0].shape();
            vec![Some(out.tape().push(
                Op::Scatter(Indices::Selected(out.id), shape),
                vec![g.id],
            )?)]
        }
    })
}
