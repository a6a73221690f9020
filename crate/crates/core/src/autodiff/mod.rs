//! Eager reverse-mode automatic differentiation on a tape.
//!
//! Every operation is evaluated immediately and recorded on a [`Tape`]. The
//! backward pass is itself expressed with the same recorded operations, so a
//! gradient obtained with [`Order::Second`] is an ordinary graph that can be
//! differentiated again (double backprop).

mod backward;
mod check;
mod ops;

use std::cell::{Cell, Ref, RefCell};
use std::collections::BTreeMap;
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub use check::{finite_difference_gradient, gradient_check};

static NEXT_TAPE_ID: AtomicU64 = AtomicU64::new(1);

/// Source of flat indices for gather/scatter nodes.
#[derive(Clone, Debug)]
pub(crate) enum Indices {
    Fixed(Arc<[usize]>),
    /// The winners currently selected by a pooling node.
    Selected(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum SelectMode {
    Max,
    Min,
}

#[derive(Clone, Debug)]
pub(crate) enum Op<S> {
    Leaf,
    MatMul { ta: bool, tb: bool },
    Reshape(Vec<usize>),
    Add,
    Sub,
    Mul,
    BroadcastTo(Vec<usize>),
    SumTo(Vec<usize>),
    Scale(S),
    /// `pos * z` for `z > 0`, `neg * z` otherwise.
    Piecewise { pos: S, neg: S },
    /// Non-differentiable step function of the input; used for derivative masks.
    Mask { pos: S, neg: S, zero: S },
    Abs,
    Log,
    Exp,
    Recip,
    Square,
    Gather(Indices, Vec<usize>),
    Scatter(Indices, Vec<usize>),
    /// Picks one element per group of each row; groups are flat feature indices.
    SelectPool {
        groups: Arc<Vec<Vec<usize>>>,
        mode: SelectMode,
    },
}

pub(crate) struct Node<S> {
    pub(crate) op: Op<S>,
    pub(crate) inputs: Vec<usize>,
    pub(crate) value: Rc<Tensor<S>>,
    pub(crate) requires_grad: bool,
    /// Flat input indices chosen by a `SelectPool` node.
    pub(crate) selected: Option<Arc<[usize]>>,
}

/// Records operations for later differentiation.
///
/// A tape is single-threaded; build one tape per thread.
pub struct Tape<S> {
    id: u64,
    nodes: RefCell<Vec<Node<S>>>,
    recording: Cell<bool>,
}

impl<S: Scalar> Default for Tape<S> {
    fn default() -> Self {
        Self::new()
    }
}

/// Handle to a node on a tape.
#[derive(Clone, Copy)]
pub struct Var<'t, S: Scalar> {
    tape: &'t Tape<S>,
    id: usize,
}

impl<S: Scalar> std::fmt::Debug for Var<'_, S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var#{}{:?}", self.id, self.shape())
    }
}

/// How far the result of a gradient request must remain differentiable.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Order {
    /// Plain gradient values; the backward pass is not recorded.
    First,
    /// The gradient is recorded and can be differentiated again.
    Second,
}

impl TryFrom<u8> for Order {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 => Ok(Order::First),
            2 => Ok(Order::Second),
            other => Err(Error::UnsupportedOrder(other)),
        }
    }
}

/// A request for `d output / d leaf` over a set of leaves.
pub struct GradientRequest<'t, S: Scalar> {
    pub output: Var<'t, S>,
    pub wrt: Vec<Var<'t, S>>,
    pub order: u8,
}

impl<S: Scalar> Tape<S> {
    pub fn new() -> Self {
        Self {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            nodes: RefCell::new(Vec::new()),
            recording: Cell::new(true),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// A differentiable leaf.
    pub fn var(&self, value: Tensor<S>) -> Var<'_, S> {
        self.leaf(value, true)
    }

    /// A leaf that never receives a gradient.
    pub fn constant(&self, value: Tensor<S>) -> Var<'_, S> {
        self.leaf(value, false)
    }

    pub fn scalar(&self, v: S) -> Var<'_, S> {
        self.constant(Tensor::scalar(v))
    }

    fn leaf(&self, value: Tensor<S>, requires_grad: bool) -> Var<'_, S> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            op: Op::Leaf,
            inputs: Vec::new(),
            value: Rc::new(value),
            requires_grad,
            selected: None,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    /// Runs `f` with recording switched off: results are constants.
    pub fn no_grad<R>(&self, f: impl FnOnce() -> R) -> R {
        let prev = self.recording.replace(false);
        let out = f();
        self.recording.set(prev);
        out
    }

    pub(crate) fn push(&self, op: Op<S>, inputs: Vec<usize>) -> Result<Var<'_, S>> {
        let (value, selected, requires_grad) = {
            let nodes = self.nodes.borrow();
            let id = nodes.len();
            let vals: Vec<&Tensor<S>> = inputs.iter().map(|&i| &*nodes[i].value).collect();
            let (value, selected) = ops::eval(&op, &vals, &nodes, id)?;
            let differentiable = !matches!(op, Op::Mask { .. });
            let rg = differentiable && inputs.iter().any(|&i| nodes[i].requires_grad);
            (value, selected, rg)
        };
        let recording = self.recording.get();
        let mut nodes = self.nodes.borrow_mut();
        if recording {
            nodes.push(Node {
                op,
                inputs,
                value: Rc::new(value),
                requires_grad,
                selected,
            });
        } else {
            nodes.push(Node {
                op: Op::Leaf,
                inputs: Vec::new(),
                value: Rc::new(value),
                requires_grad: false,
                selected,
            });
        }
        Ok(Var {
            tape: self,
            id: nodes.len() - 1,
        })
    }

    pub(crate) fn nodes(&self) -> Ref<'_, Vec<Node<S>>> {
        self.nodes.borrow()
    }

    fn check_owner(&self, v: &Var<'_, S>) -> Result<()> {
        if v.tape.id != self.id {
            return Err(Error::ForeignVar);
        }
        Ok(())
    }

    /// Overwrites a leaf value; call [`Tape::recompute`] to refresh dependents.
    pub fn set_value(&self, leaf: Var<'_, S>, value: Tensor<S>) -> Result<()> {
        self.check_owner(&leaf)?;
        let mut nodes = self.nodes.borrow_mut();
        let node = &mut nodes[leaf.id];
        if !matches!(node.op, Op::Leaf) {
            return Err(Error::InvalidArgument(format!(
                "node {} is not a leaf",
                leaf.id
            )));
        }
        if node.value.shape() != value.shape() {
            return Err(Error::ShapeMismatch {
                node: leaf.id,
                op: "leaf",
                detail: format!("{:?} replaced by {:?}", node.value.shape(), value.shape()),
            });
        }
        node.value = Rc::new(value);
        Ok(())
    }

    /// Re-evaluates every recorded node up to and including `root`, in
    /// recording (topological) order, from the current leaf values.
    pub fn recompute(&self, root: Var<'_, S>) -> Result<Rc<Tensor<S>>> {
        self.check_owner(&root)?;
        let mut nodes = self.nodes.borrow_mut();
        for id in 0..=root.id {
            if matches!(nodes[id].op, Op::Leaf) {
                continue;
            }
            let (value, selected) = {
                let node = &nodes[id];
                let vals: Vec<&Tensor<S>> =
                    node.inputs.iter().map(|&i| &*nodes[i].value).collect();
                ops::eval(&node.op, &vals, &nodes, id)?
            };
            nodes[id].value = Rc::new(value);
            nodes[id].selected = selected;
        }
        Ok(nodes[root.id].value.clone())
    }

    /// `d output / d leaf` for each leaf in `wrt`.
    ///
    /// Leaves without a path to `output` get an exactly-zero tensor.
    pub fn gradient<'t>(
        &'t self,
        output: Var<'t, S>,
        wrt: &[Var<'t, S>],
        order: Order,
    ) -> Result<Vec<Var<'t, S>>> {
        self.check_owner(&output)?;
        for w in wrt {
            self.check_owner(w)?;
        }
        let shape = output.shape();
        if !shape.iter().all(|&d| d == 1) {
            return Err(Error::NonScalarOutput(shape));
        }
        let ids: Vec<usize> = wrt.iter().map(|v| v.id).collect();
        match order {
            Order::First => self.no_grad(|| backward::run(self, output.id, &ids)),
            Order::Second => {
                let prev = self.recording.replace(true);
                let out = backward::run(self, output.id, &ids);
                self.recording.set(prev);
                out
            }
        }
    }

    /// First-order gradient values.
    pub fn grad(&self, output: Var<'_, S>, wrt: &[Var<'_, S>]) -> Result<Vec<Tensor<S>>> {
        let vars = self.gradient(output, wrt, Order::First)?;
        Ok(vars.iter().map(|v| (*v.value()).clone()).collect())
    }

    /// Serves a [`GradientRequest`], keyed by leaf node id.
    pub fn request<'t>(
        &'t self,
        req: &GradientRequest<'t, S>,
    ) -> Result<BTreeMap<usize, Var<'t, S>>> {
        let order = Order::try_from(req.order)?;
        let grads = self.gradient(req.output, &req.wrt, order)?;
        Ok(req.wrt.iter().map(|v| v.id).zip(grads).collect())
    }
}

impl<'t, S: Scalar> Var<'t, S> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn tape(&self) -> &'t Tape<S> {
        self.tape
    }

    /// The value computed for this node.
    pub fn value(&self) -> Rc<Tensor<S>> {
        self.tape.nodes.borrow()[self.id].value.clone()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.tape.nodes.borrow()[self.id].value.shape().to_vec()
    }

    pub fn item(&self) -> S {
        self.value().item()
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.nodes.borrow()[self.id].requires_grad
    }

    fn same_tape(&self, other: &Var<'t, S>) -> Result<()> {
        if self.tape.id != other.tape.id {
            return Err(Error::ForeignVar);
        }
        Ok(())
    }

    fn unary(self, op: Op<S>) -> Var<'t, S> {
        self.tape
            .push(op, vec![self.id])
            .expect("elementwise unary op cannot fail")
    }

    fn binary(self, op: Op<S>, other: Var<'t, S>) -> Result<Var<'t, S>> {
        self.same_tape(&other)?;
        self.tape.push(op, vec![self.id, other.id])
    }

    /// Elementwise sum; either side may broadcast when its shape is a
    /// suffix of the other's.
    pub fn add(self, other: Var<'t, S>) -> Result<Var<'t, S>> {
        self.binary(Op::Add, other)
    }

    pub fn sub(self, other: Var<'t, S>) -> Result<Var<'t, S>> {
        self.binary(Op::Sub, other)
    }

    pub fn mul(self, other: Var<'t, S>) -> Result<Var<'t, S>> {
        self.binary(Op::Mul, other)
    }

    pub fn div(self, other: Var<'t, S>) -> Result<Var<'t, S>> {
        self.mul(other.recip())
    }

    pub fn add_scalar(self, c: S) -> Var<'t, S> {
        let k = self.tape.scalar(c);
        self.add(k).expect("scalar broadcasts")
    }

    pub fn scale(self, c: S) -> Var<'t, S> {
        self.unary(Op::Scale(c))
    }

    pub fn neg(self) -> Var<'t, S> {
        self.scale(-S::one())
    }

    /// Two-slope piecewise-linear activation through the origin.
    pub fn piecewise(self, pos: S, neg: S) -> Var<'t, S> {
        self.unary(Op::Piecewise { pos, neg })
    }

    pub fn relu(self) -> Var<'t, S> {
        self.piecewise(S::one(), S::zero())
    }

    pub fn leaky_relu(self, slope: S) -> Var<'t, S> {
        self.piecewise(S::one(), slope)
    }

    pub(crate) fn mask(self, pos: S, neg: S, zero: S) -> Var<'t, S> {
        self.unary(Op::Mask { pos, neg, zero })
    }

    pub fn abs(self) -> Var<'t, S> {
        self.unary(Op::Abs)
    }

    pub fn ln(self) -> Var<'t, S> {
        self.unary(Op::Log)
    }

    pub fn exp(self) -> Var<'t, S> {
        self.unary(Op::Exp)
    }

    pub fn recip(self) -> Var<'t, S> {
        self.unary(Op::Recip)
    }

    pub fn square(self) -> Var<'t, S> {
        self.unary(Op::Square)
    }

    /// Sum of all elements, as a scalar.
    pub fn sum(self) -> Var<'t, S> {
        self.sum_to(&[]).expect("any shape reduces to a scalar")
    }

    pub fn mean(self) -> Var<'t, S> {
        let n = self.value().len();
        self.sum().scale(S::one() / S::of(n as f64))
    }

    /// Sums away leading axes until the shape equals `shape`.
    pub fn sum_to(self, shape: &[usize]) -> Result<Var<'t, S>> {
        let own = self.shape();
        if own == shape {
            return Ok(self);
        }
        self.tape.push(Op::SumTo(shape.to_vec()), vec![self.id])
    }

    /// Repeats the tensor along new leading axes.
    pub fn broadcast_to(self, shape: &[usize]) -> Result<Var<'t, S>> {
        let own = self.shape();
        if own == shape {
            return Ok(self);
        }
        self.tape.push(Op::BroadcastTo(shape.to_vec()), vec![self.id])
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Var<'t, S>> {
        if self.shape() == shape {
            return Ok(self);
        }
        self.tape.push(Op::Reshape(shape.to_vec()), vec![self.id])
    }

    /// Matrix product. Rank-1 operands are treated as a row (left) or a
    /// column (right) vector and the result is squeezed accordingly.
    pub fn matmul(self, other: Var<'t, S>) -> Result<Var<'t, S>> {
        self.matmul_t(other, false, false)
    }

    /// `op(self) * op(other)` where `op` transposes when the flag is set.
    pub fn matmul_t(self, other: Var<'t, S>, ta: bool, tb: bool) -> Result<Var<'t, S>> {
        self.same_tape(&other)?;
        let (sa, sb) = (self.shape(), other.shape());
        let a = match sa.len() {
            1 if !ta => self.reshape(&[1, sa[0]])?,
            1 => self.reshape(&[sa[0], 1])?,
            _ => self,
        };
        let b = match sb.len() {
            1 if !tb => other.reshape(&[sb[0], 1])?,
            1 => other.reshape(&[1, sb[0]])?,
            _ => other,
        };
        let out = self.tape.push(Op::MatMul { ta, tb }, vec![a.id, b.id])?;
        let os = out.shape();
        match (sa.len(), sb.len()) {
            (1, 1) => out.reshape(&[]),
            (1, _) => out.reshape(&[os[1]]),
            (_, 1) => out.reshape(&[os[0]]),
            _ => Ok(out),
        }
    }

    /// `out.flat[j] = self.flat[indices[j]]`, shaped as `shape`.
    pub fn gather(self, indices: Arc<[usize]>, shape: &[usize]) -> Result<Var<'t, S>> {
        self.tape.push(
            Op::Gather(Indices::Fixed(indices), shape.to_vec()),
            vec![self.id],
        )
    }

    /// Adjoint of [`Var::gather`]: accumulates into a zero tensor of `shape`.
    pub fn scatter(self, indices: Arc<[usize]>, shape: &[usize]) -> Result<Var<'t, S>> {
        self.tape.push(
            Op::Scatter(Indices::Fixed(indices), shape.to_vec()),
            vec![self.id],
        )
    }

    /// Max (or min) over explicit feature groups of the last axis. Ties go to
    /// the first extremal element of the group.
    pub(crate) fn select_pool(
        self,
        groups: Arc<Vec<Vec<usize>>>,
        mode: SelectMode,
    ) -> Result<Var<'t, S>> {
        self.tape.push(Op::SelectPool { groups, mode }, vec![self.id])
    }

    /// Non-overlapping max pooling along the last axis.
    pub fn max_pool1d(self, window: usize) -> Result<Var<'t, S>> {
        let groups = window_groups(self.last_dim(), window, 1)?;
        self.select_pool(Arc::new(groups), SelectMode::Max)
    }

    pub fn min_pool1d(self, window: usize) -> Result<Var<'t, S>> {
        let groups = window_groups(self.last_dim(), window, 1)?;
        self.select_pool(Arc::new(groups), SelectMode::Min)
    }

    /// Non-overlapping average pooling along the last axis.
    pub fn avg_pool1d(self, window: usize) -> Result<Var<'t, S>> {
        let groups = window_groups(self.last_dim(), window, 1)?;
        self.group_mean(&groups)
    }

    /// Mean over explicit groups of the last axis, as a product with a
    /// constant pooling matrix.
    pub(crate) fn group_mean(self, groups: &[Vec<usize>]) -> Result<Var<'t, S>> {
        let n = self.last_dim();
        let mut m = Tensor::zeros(&[n, groups.len()]);
        for (j, g) in groups.iter().enumerate() {
            let w = S::one() / S::of(g.len() as f64);
            for &i in g {
                m.data_mut()[i * groups.len() + j] = w;
            }
        }
        let pool = self.tape.constant(m);
        self.matmul(pool)
    }

    fn last_dim(&self) -> usize {
        self.shape().last().copied().unwrap_or(1)
    }
}

/// Groups of `window` consecutive positions, per channel, for a signal laid
/// out position-major with `channels` interleaved channels.
pub(crate) fn window_groups(
    features: usize,
    window: usize,
    channels: usize,
) -> Result<Vec<Vec<usize>>> {
    if window == 0 || channels == 0 || features % channels != 0 {
        return Err(Error::InvalidSpec(format!(
            "cannot pool {features} features with window {window} over {channels} channels"
        )));
    }
    let length = features / channels;
    if length % window != 0 {
        return Err(Error::InvalidSpec(format!(
            "pool window {window} does not divide signal length {length}"
        )));
    }
    let mut groups = Vec::with_capacity(features / window);
    for p in 0..length / window {
        for c in 0..channels {
            groups.push(
                (0..window)
                    .map(|w| (p * window + w) * channels + c)
                    .collect(),
            );
        }
    }
    Ok(groups)
}

#[cfg(test)]
mod tests;
