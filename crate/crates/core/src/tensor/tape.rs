use super::{kernels, Tensor};
use crate::error::{Error, Result};

/// Handle to a tensor recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Binary {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, Copy)]
pub enum Operand {
    Var(Var),
    Scalar(f64),
}

impl From<Var> for Operand {
    fn from(v: Var) -> Self {
        Operand::Var(v)
    }
}

impl From<f64> for Operand {
    fn from(s: f64) -> Self {
        Operand::Scalar(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    /// Tanh approximation: `0.5·x·(1 + tanh(√(2/π)·(x + 0.044715·x³)))`.
    Gelu,
    Sigmoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduction {
    Sum,
    Mean,
}

/// Backward rule for a custom op: `(inputs, output, d loss / d output)` to
/// one optional gradient per input, each shaped like that input.
pub type BackwardFn = Box<dyn Fn(&[&Tensor], &Tensor, &[f64]) -> Vec<Option<Vec<f64>>>>;

enum Op {
    Leaf,
    MatMul(Var, Var),
    Binary(Binary, Var, Var),
    Scalar(Binary, Var, f64),
    Activation(Activation, Var),
    Reduce(Reduction, Var, Vec<usize>),
    AddRow(Var, Var),
    Custom(Vec<Var>, BackwardFn),
}

impl Op {
    fn inputs(&self) -> Vec<Var> {
        match self {
            Op::Leaf => vec![],
            Op::MatMul(a, b) | Op::Binary(_, a, b) | Op::AddRow(a, b) => vec![*a, *b],
            Op::Scalar(_, a, _) | Op::Activation(_, a) | Op::Reduce(_, a, _) => vec![*a],
            Op::Custom(ins, _) => ins.clone(),
        }
    }
}

struct Node {
    value: Tensor,
    grad: Option<Vec<f64>>,
    needs_grad: bool,
    op: Op,
}

/// Wengert list of recorded operations. Entries only ever reference earlier
/// entries, so the recording order is a topological order.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    backward_done: bool,
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

pub(crate) fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

pub(crate) fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + GELU_A * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, name: &str) -> Result<Var> {
        value.ensure_finite(name)?;
        let needs_grad = op.inputs().iter().any(|v| self.nodes[v.0].needs_grad);
        self.nodes.push(Node { value, grad: None, needs_grad, op });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Records a leaf. Leaves with `requires_grad` receive gradients on
    /// [`Tape::backward`].
    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Result<Var> {
        value.ensure_finite("leaf")?;
        self.nodes.push(Node { value, grad: None, needs_grad: requires_grad, op: Op::Leaf });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn param(&mut self, value: Tensor) -> Result<Var> {
        self.leaf(value, true)
    }

    pub fn constant(&mut self, value: Tensor) -> Result<Var> {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// Accumulated gradient of the last backward pass, if any reached `v`.
    pub fn grad(&self, v: Var) -> Option<Tensor> {
        let node = &self.nodes[v.0];
        node.grad.as_ref().map(|g| Tensor { shape: node.value.shape.clone(), data: g.clone() })
    }

    pub fn take_grad(&mut self, v: Var) -> Option<Vec<f64>> {
        self.nodes[v.0].grad.take()
    }

    /// Clears every gradient; required before another backward pass.
    pub fn zero_grads(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
        self.backward_done = false;
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        let (m, k, n) = match (av.shape(), bv.shape()) {
            ([m, k], [k2, n]) if k == k2 => (*m, *k, *n),
            (sa, sb) => return Err(Error::dim(format!("matmul {sa:?} · {sb:?}"))),
        };
        let out = kernels::matmul_nn(av.data(), bv.data(), m, k, n);
        self.push(Tensor { shape: vec![m, n], data: out }, Op::MatMul(a, b), "matmul")
    }

    pub fn elementwise(&mut self, a: Var, b: impl Into<Operand>, kind: Binary) -> Result<Var> {
        match b.into() {
            Operand::Var(b) => {
                let (av, bv) = (self.value(a), self.value(b));
                if av.shape() != bv.shape() {
                    return Err(Error::dim(format!("elementwise {kind:?} on {:?} and {:?}", av.shape(), bv.shape())));
                }
                if kind == Binary::Div && bv.data().contains(&0.0) {
                    return Err(Error::numeric("division by zero"));
                }
                let data = av.data().iter().zip(bv.data()).map(|(&x, &y)| apply(kind, x, y)).collect();
                let shape = av.shape.clone();
                self.push(Tensor { shape, data }, Op::Binary(kind, a, b), "elementwise")
            }
            Operand::Scalar(s) => {
                if kind == Binary::Div && s == 0.0 {
                    return Err(Error::numeric("division by zero"));
                }
                let av = self.value(a);
                let data = av.data().iter().map(|&x| apply(kind, x, s)).collect();
                let shape = av.shape.clone();
                self.push(Tensor { shape, data }, Op::Scalar(kind, a, s), "elementwise")
            }
        }
    }

    pub fn add(&mut self, a: Var, b: impl Into<Operand>) -> Result<Var> {
        self.elementwise(a, b, Binary::Add)
    }

    pub fn sub(&mut self, a: Var, b: impl Into<Operand>) -> Result<Var> {
        self.elementwise(a, b, Binary::Sub)
    }

    pub fn mul(&mut self, a: Var, b: impl Into<Operand>) -> Result<Var> {
        self.elementwise(a, b, Binary::Mul)
    }

    pub fn div(&mut self, a: Var, b: impl Into<Operand>) -> Result<Var> {
        self.elementwise(a, b, Binary::Div)
    }

    /// Adds a length-`n` vector to every row of an `m×n` matrix.
    pub fn add_row(&mut self, x: Var, row: Var) -> Result<Var> {
        let (xv, rv) = (self.value(x), self.value(row));
        let n = match (xv.shape(), rv.shape()) {
            ([_, n], [n2]) if n == n2 => *n,
            (sx, sr) => return Err(Error::dim(format!("add_row {sx:?} + {sr:?}"))),
        };
        let mut data = xv.data().to_vec();
        for chunk in data.chunks_mut(n) {
            for (d, r) in chunk.iter_mut().zip(rv.data()) {
                *d += r;
            }
        }
        let shape = xv.shape.clone();
        self.push(Tensor { shape, data }, Op::AddRow(x, row), "add_row")
    }

    pub fn activation(&mut self, x: Var, kind: Activation) -> Result<Var> {
        let xv = self.value(x);
        let f: fn(f64) -> f64 = match kind {
            Activation::Relu => |v| v.max(0.0),
            Activation::Gelu => gelu,
            Activation::Sigmoid => sigmoid,
        };
        let data = xv.data().iter().map(|&v| f(v)).collect();
        let shape = xv.shape.clone();
        self.push(Tensor { shape, data }, Op::Activation(kind, x), "activation")
    }

    /// Reduces over `axes` (all axes when empty), dropping them from the shape.
    pub fn reduce(&mut self, x: Var, kind: Reduction, axes: &[usize]) -> Result<Var> {
        let xv = self.value(x);
        let rank = xv.rank();
        let mut axes: Vec<usize> = if axes.is_empty() { (0..rank).collect() } else { axes.to_vec() };
        axes.sort_unstable();
        axes.dedup();
        if let Some(&bad) = axes.iter().find(|&&a| a >= rank) {
            return Err(Error::dim(format!("axis {bad} out of range for rank {rank}")));
        }
        let map = ReduceMap::new(xv.shape(), &axes);
        let mut out = vec![0.0; map.out_len];
        for (i, &v) in xv.data().iter().enumerate() {
            out[map.out_index(i)] += v;
        }
        if kind == Reduction::Mean {
            let count = map.group as f64;
            out.iter_mut().for_each(|v| *v /= count);
        }
        let shape = map.out_shape.clone();
        self.push(Tensor { shape, data: out }, Op::Reduce(kind, x, axes), "reduce")
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        self.reduce(x, Reduction::Sum, &[])
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        self.reduce(x, Reduction::Mean, &[])
    }

    /// Records an op whose forward value was computed by the caller.
    pub fn custom(&mut self, inputs: &[Var], value: Tensor, backward: BackwardFn) -> Result<Var> {
        self.push(value, Op::Custom(inputs.to_vec(), backward), "custom op")
    }

    /// Propagates `d loss / d ·` to every node that depends on a
    /// `requires_grad` leaf. Gradients add up when a tensor has several
    /// consumers.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.nodes[loss.0].value.numel() != 1 {
            return Err(Error::contract(format!("backward on non-scalar of shape {:?}", self.nodes[loss.0].value.shape())));
        }
        if self.backward_done {
            return Err(Error::contract("backward called twice without zero_grads"));
        }
        self.backward_done = true;
        if !self.nodes[loss.0].needs_grad {
            return Ok(());
        }
        self.nodes[loss.0].grad = Some(vec![1.0]);
        for id in (0..=loss.0).rev() {
            let (before, rest) = self.nodes.split_at_mut(id);
            let node = &rest[0];
            let Some(g) = node.grad.as_ref() else { continue };
            if !node.needs_grad {
                continue;
            }
            backprop(before, node, g);
        }
        Ok(())
    }
}

fn apply(kind: Binary, x: f64, y: f64) -> f64 {
    match kind {
        Binary::Add => x + y,
        Binary::Sub => x - y,
        Binary::Mul => x * y,
        Binary::Div => x / y,
    }
}

fn accumulate(nodes: &mut [Node], v: Var, contrib: impl FnOnce(&mut [f64])) {
    let node = &mut nodes[v.0];
    if !node.needs_grad {
        return;
    }
    let n = node.value.numel();
    let g = node.grad.get_or_insert_with(|| vec![0.0; n]);
    contrib(g);
}

fn accumulate_owned(nodes: &mut [Node], v: Var, contrib: Vec<f64>) {
    let node = &mut nodes[v.0];
    match node.grad.as_mut() {
        Some(g) => add_into(g, &contrib),
        None => node.grad = Some(contrib),
    }
}

fn backprop(before: &mut [Node], node: &Node, g: &[f64]) {
    match &node.op {
        Op::Leaf => {}
        Op::MatMul(a, b) => {
            let (av, bv) = (&before[a.0].value, &before[b.0].value);
            let (m, k, n) = (av.shape[0], av.shape[1], bv.shape[1]);
            let ga = before[a.0].needs_grad.then(|| {
                let mut d = vec![0.0; m * k];
                kernels::matmul_nt_acc(g, bv.data(), m, k, n, &mut d);
                d
            });
            let gb = before[b.0].needs_grad.then(|| {
                let mut d = vec![0.0; k * n];
                kernels::matmul_tn_acc(av.data(), g, m, k, n, &mut d);
                d
            });
            if let Some(d) = ga {
                accumulate_owned(before, *a, d);
            }
            if let Some(d) = gb {
                accumulate_owned(before, *b, d);
            }
        }
        Op::Binary(kind, a, b) => {
            let (av, bv) = (before[a.0].value.data.clone(), before[b.0].value.data.clone());
            match kind {
                Binary::Add => {
                    accumulate(before, *a, |ga| add_into(ga, g));
                    accumulate(before, *b, |gb| add_into(gb, g));
                }
                Binary::Sub => {
                    accumulate(before, *a, |ga| add_into(ga, g));
                    accumulate(before, *b, |gb| gb.iter_mut().zip(g).for_each(|(d, s)| *d -= s));
                }
                Binary::Mul => {
                    accumulate(before, *a, |ga| zip3(ga, g, &bv, |gi, y| gi * y));
                    accumulate(before, *b, |gb| zip3(gb, g, &av, |gi, x| gi * x));
                }
                Binary::Div => {
                    accumulate(before, *a, |ga| zip3(ga, g, &bv, |gi, y| gi / y));
                    accumulate(before, *b, |gb| {
                        for i in 0..gb.len() {
                            gb[i] -= g[i] * av[i] / (bv[i] * bv[i]);
                        }
                    });
                }
            }
        }
        Op::Scalar(kind, a, s) => {
            let s = *s;
            accumulate(before, *a, |ga| match kind {
                Binary::Add | Binary::Sub => add_into(ga, g),
                Binary::Mul => ga.iter_mut().zip(g).for_each(|(d, gi)| *d += gi * s),
                Binary::Div => ga.iter_mut().zip(g).for_each(|(d, gi)| *d += gi / s),
            });
        }
        Op::Activation(kind, x) => {
            let xv = before[x.0].value.data.clone();
            let out = node.value.data();
            accumulate(before, *x, |gx| match kind {
                Activation::Relu => zip3(gx, g, &xv, |gi, v| if v > 0.0 { gi } else { 0.0 }),
                Activation::Gelu => zip3(gx, g, &xv, |gi, v| gi * gelu_grad(v)),
                Activation::Sigmoid => zip3(gx, g, out, |gi, s| gi * s * (1.0 - s)),
            });
        }
        Op::Reduce(kind, x, axes) => {
            let map = ReduceMap::new(before[x.0].value.shape(), axes);
            let scale = match kind {
                Reduction::Sum => 1.0,
                Reduction::Mean => 1.0 / map.group as f64,
            };
            accumulate(before, *x, |gx| {
                for (i, d) in gx.iter_mut().enumerate() {
                    *d += g[map.out_index(i)] * scale;
                }
            });
        }
        Op::AddRow(x, row) => {
            let n = before[row.0].value.numel();
            accumulate(before, *x, |gx| add_into(gx, g));
            accumulate(before, *row, |gr| {
                for chunk in g.chunks(n) {
                    add_into(gr, chunk);
                }
            });
        }
        Op::Custom(inputs, f) => {
            let grads = {
                let values: Vec<&Tensor> = inputs.iter().map(|v| &before[v.0].value).collect();
                f(&values, &node.value, g)
            };
            for (v, gi) in inputs.iter().zip(grads) {
                if let Some(gi) = gi {
                    accumulate(before, *v, |d| add_into(d, &gi));
                }
            }
        }
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
}

fn zip3(dst: &mut [f64], g: &[f64], other: &[f64], f: impl Fn(f64, f64) -> f64) {
    for i in 0..dst.len() {
        dst[i] += f(g[i], other[i]);
    }
}

/// Index arithmetic from an input position to its reduced output position.
struct ReduceMap {
    out_shape: Vec<usize>,
    out_len: usize,
    group: usize,
    // per input axis: (input stride, output stride or 0 when reduced, extent)
    axes: Vec<(usize, usize, usize)>,
}

impl ReduceMap {
    fn new(shape: &[usize], reduced: &[usize]) -> Self {
        let out_shape: Vec<usize> = shape.iter().enumerate().filter(|(i, _)| !reduced.contains(i)).map(|(_, &e)| e).collect();
        let mut in_stride = vec![1; shape.len()];
        for i in (0..shape.len().saturating_sub(1)).rev() {
            in_stride[i] = in_stride[i + 1] * shape[i + 1];
        }
        let mut out_stride = vec![0; shape.len()];
        let mut acc = 1;
        for i in (0..shape.len()).rev() {
            if !reduced.contains(&i) {
                out_stride[i] = acc;
                acc *= shape[i];
            }
        }
        let group = reduced.iter().map(|&a| shape[a]).product();
        let axes = (0..shape.len()).map(|i| (in_stride[i], out_stride[i], shape[i])).collect();
        ReduceMap { out_len: out_shape.iter().product(), out_shape, group, axes }
    }

    fn out_index(&self, flat: usize) -> usize {
        self.axes.iter().map(|&(is, os, ext)| ((flat / is) % ext) * os).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn identity_matmul() {
        let mut tape = Tape::new();
        let i = tape.constant(t(&[2, 2], &[1., 0., 0., 1.])).unwrap();
        let m = tape.constant(t(&[2, 2], &[1., 2., 3., 4.])).unwrap();
        let y = tape.matmul(i, m).unwrap();
        assert_eq!(tape.value(y).data(), &[1., 2., 3., 4.]);
    }

    #[test]
    fn row_times_column() {
        let mut tape = Tape::new();
        let a = tape.constant(t(&[1, 2], &[1., 2.])).unwrap();
        let b = tape.constant(t(&[2, 1], &[3., 4.])).unwrap();
        let y = tape.matmul(a, b).unwrap();
        assert_eq!(tape.value(y).shape(), &[1, 1]);
        assert_eq!(tape.value(y).data(), &[11.]);
    }

    #[test]
    fn matmul_shape_mismatch() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::zeros(&[2, 3])).unwrap();
        let b = tape.constant(Tensor::zeros(&[2, 3])).unwrap();
        assert!(matches!(tape.matmul(a, b), Err(Error::Dimension(_))));
    }

    #[test]
    fn elementwise_identities() {
        let mut tape = Tape::new();
        let x = tape.constant(t(&[3], &[1.5, -2., 0.25])).unwrap();
        let y = tape.add(x, 0.0).unwrap();
        let z = tape.mul(x, 1.0).unwrap();
        assert_eq!(tape.value(y), tape.value(x));
        assert_eq!(tape.value(z), tape.value(x));
    }

    #[test]
    fn division_by_zero_is_numeric_error() {
        let mut tape = Tape::new();
        let x = tape.constant(t(&[2], &[1., 2.])).unwrap();
        let z = tape.constant(t(&[2], &[1., 0.])).unwrap();
        assert!(matches!(tape.div(x, 0.0), Err(Error::Numeric(_))));
        assert!(matches!(tape.div(x, z), Err(Error::Numeric(_))));
    }

    #[test]
    fn activations_at_fixed_points() {
        let mut tape = Tape::new();
        let x = tape.constant(t(&[3], &[-1., 2., 0.])).unwrap();
        let r = tape.activation(x, Activation::Relu).unwrap();
        let s = tape.activation(x, Activation::Sigmoid).unwrap();
        assert_eq!(tape.value(r).data(), &[0., 2., 0.]);
        assert_eq!(tape.value(s).data()[2], 0.5);
    }

    #[test]
    fn reductions() {
        let mut tape = Tape::new();
        let x = tape.param(t(&[2], &[2., 4.])).unwrap();
        let m = tape.mean(x).unwrap();
        assert_eq!(tape.value(m).item().unwrap(), 3.0);
        let z = tape.constant(Tensor::zeros(&[3, 4])).unwrap();
        let s = tape.sum(z).unwrap();
        assert_eq!(tape.value(s).item().unwrap(), 0.0);
        tape.backward(m).unwrap();
        assert_eq!(tape.grad(x).unwrap().data(), &[0.5, 0.5]);
    }

    #[test]
    fn reduce_single_axis() {
        let mut tape = Tape::new();
        let x = tape.param(t(&[2, 3], &[1., 2., 3., 4., 5., 6.])).unwrap();
        let rows = tape.reduce(x, Reduction::Sum, &[1]).unwrap();
        let cols = tape.reduce(x, Reduction::Mean, &[0]).unwrap();
        assert_eq!(tape.value(rows).data(), &[6., 15.]);
        assert_eq!(tape.value(cols).data(), &[2.5, 3.5, 4.5]);
        assert!(matches!(tape.reduce(x, Reduction::Sum, &[2]), Err(Error::Dimension(_))));
    }

    #[test]
    fn sum_grad_is_ones() {
        let mut tape = Tape::new();
        let w = tape.param(t(&[2, 2], &[0.3, -1., 2., 5.])).unwrap();
        let l = tape.sum(w).unwrap();
        tape.backward(l).unwrap();
        assert_eq!(tape.grad(w).unwrap().data(), &[1., 1., 1., 1.]);
    }

    #[test]
    fn half_square_grad_is_identity() {
        let mut tape = Tape::new();
        let data = [0.3, -1., 2., 5.];
        let w = tape.param(t(&[4], &data)).unwrap();
        let sq = tape.mul(w, w).unwrap();
        let s = tape.sum(sq).unwrap();
        let l = tape.div(s, 2.0).unwrap();
        tape.backward(l).unwrap();
        assert_eq!(tape.grad(w).unwrap().data(), &data);
    }

    #[test]
    fn fan_out_accumulates() {
        let mut tape = Tape::new();
        let x = tape.param(t(&[3], &[1., 2., 3.])).unwrap();
        let y = tape.add(x, x).unwrap();
        let l = tape.sum(y).unwrap();
        tape.backward(l).unwrap();
        assert_eq!(tape.grad(x).unwrap().data(), &[2., 2., 2.]);
    }

    #[test]
    fn backward_contract() {
        let mut tape = Tape::new();
        let x = tape.param(t(&[2], &[1., 2.])).unwrap();
        assert!(matches!(tape.backward(x), Err(Error::Contract(_))));
        let l = tape.sum(x).unwrap();
        tape.backward(l).unwrap();
        assert!(matches!(tape.backward(l), Err(Error::Contract(_))));
        tape.zero_grads();
        assert!(tape.grad(x).is_none());
        tape.backward(l).unwrap();
        assert_eq!(tape.grad(x).unwrap().data(), &[1., 1.]);
    }

    #[test]
    fn non_finite_forward_is_rejected() {
        let mut tape = Tape::new();
        assert!(tape.constant(t(&[1], &[f64::NAN])).is_err());
        let x = tape.constant(t(&[1], &[1e308])).unwrap();
        assert!(matches!(tape.mul(x, 10.0), Err(Error::Numeric(_))));
    }

    #[test]
    fn constants_get_no_grad() {
        let mut tape = Tape::new();
        let c = tape.constant(t(&[2], &[1., 2.])).unwrap();
        let w = tape.param(t(&[2], &[3., 4.])).unwrap();
        let y = tape.mul(c, w).unwrap();
        let l = tape.sum(y).unwrap();
        tape.backward(l).unwrap();
        assert!(tape.grad(c).is_none());
        assert_eq!(tape.grad(w).unwrap().data(), &[1., 2.]);
    }
}
