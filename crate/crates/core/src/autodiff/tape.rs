//! Wengert-list tape over [`Tensor`] values.
//!
//! Every primitive appends one node holding its forward value. Nodes only
//! reference earlier nodes, so the node vector is already in topological
//! order and `backward` is a single reverse sweep.

use std::collections::BTreeMap;

use super::tensor::{matmul_into, matmul_nt_into, matmul_tn_into, Tensor};
use super::AutodiffError;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// The primitive set. Binary ops take `[lhs, rhs]`; `Add`, `Sub` and `Mul`
/// also accept a `1 x c` right-hand side broadcast over the rows of `lhs`.
#[derive(Clone, Debug, PartialEq)]
pub enum PrimitiveOp {
    MatMul,
    Add,
    Sub,
    Mul,
    ConcatCols,
    ConcatRows,
    SliceCols { start: usize, end: usize },
    SliceRows { start: usize, end: usize },
    BroadcastRow { rows: usize },
    Transpose,
    Reshape { rows: usize, cols: usize },
    Sigmoid,
    Tanh,
    Relu,
    Exp,
    Log,
    Negate,
    Scale(f64),
    Clamp { lo: f64, hi: f64 },
    SumAll,
    MeanRows,
    MeanAll,
    SoftmaxRows,
}

impl PrimitiveOp {
    pub fn name(&self) -> &'static str {
        match self {
            Self::MatMul => "matmul",
            Self::Add => "add",
            Self::Sub => "sub",
            Self::Mul => "mul",
            Self::ConcatCols => "concat-cols",
            Self::ConcatRows => "concat-rows",
            Self::SliceCols { .. } => "slice-cols",
            Self::SliceRows { .. } => "slice-rows",
            Self::BroadcastRow { .. } => "broadcast-row",
            Self::Transpose => "transpose",
            Self::Reshape { .. } => "reshape",
            Self::Sigmoid => "sigmoid",
            Self::Tanh => "tanh",
            Self::Relu => "relu",
            Self::Exp => "exp",
            Self::Log => "log",
            Self::Negate => "negate",
            Self::Scale(_) => "scale",
            Self::Clamp { .. } => "clamp",
            Self::SumAll => "sum-all",
            Self::MeanRows => "mean-rows",
            Self::MeanAll => "mean-all",
            Self::SoftmaxRows => "softmax-rows",
        }
    }

    pub fn arity(&self) -> usize {
        match self {
            Self::MatMul | Self::Add | Self::Sub | Self::Mul | Self::ConcatCols | Self::ConcatRows => 2,
            _ => 1,
        }
    }
}

#[derive(Clone, Debug)]
enum NodeOp {
    Constant,
    Leaf,
    Apply {
        op: PrimitiveOp,
        inputs: [usize; 2],
        broadcast: bool,
    },
}

#[derive(Clone, Debug)]
struct Node {
    value: Tensor,
    op: NodeOp,
    /// Some trainable leaf is upstream of this node.
    tracked: bool,
}

/// Single-owner recording of a computation.
#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar output with respect to every trainable leaf.
#[derive(Clone, Debug, Default)]
pub struct Gradients {
    by_leaf: BTreeMap<Var, Tensor>,
}

impl Gradients {
    pub fn get(&self, leaf: Var) -> Option<&Tensor> {
        self.by_leaf.get(&leaf)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Var, &Tensor)> {
        self.by_leaf.iter().map(|(v, t)| (*v, t))
    }

    pub fn len(&self) -> usize {
        self.by_leaf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_leaf.is_empty()
    }

    pub(crate) fn take(&mut self, leaf: Var) -> Option<Tensor> {
        self.by_leaf.remove(&leaf)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Self {
            nodes: Vec::with_capacity(n),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records a non-trainable input.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, NodeOp::Constant)
    }

    /// Records a trainable leaf; `backward` reports a gradient for it.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, NodeOp::Leaf)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    fn push(&mut self, value: Tensor, op: NodeOp) -> Var {
        let tracked = match &op {
            NodeOp::Constant => false,
            NodeOp::Leaf => true,
            NodeOp::Apply { inputs, .. } => inputs.iter().any(|&i| i != usize::MAX && self.nodes[i].tracked),
        };
        self.nodes.push(Node { value, op, tracked });
        Var(self.nodes.len() - 1)
    }

    /// Evaluates `op` on recorded inputs and records the result.
    pub fn apply(&mut self, op: PrimitiveOp, inputs: &[Var]) -> Result<Var, AutodiffError> {
        if inputs.len() != op.arity() {
            return Err(AutodiffError::InvalidArgument(format!(
                "{} expects {} inputs, got {}",
                op.name(),
                op.arity(),
                inputs.len()
            )));
        }
        let a = &self.nodes[inputs[0].0].value;
        let b = inputs.get(1).map(|v| &self.nodes[v.0].value);
        let (value, broadcast) = forward(&op, a, b)?;
        if !value.is_finite() {
            return Err(AutodiffError::NonFinite { op: op.name() });
        }
        let idx = [inputs[0].0, inputs.get(1).map_or(usize::MAX, |v| v.0)];
        Ok(self.push(
            value,
            NodeOp::Apply {
                op,
                inputs: idx,
                broadcast,
            },
        ))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.apply(PrimitiveOp::MatMul, &[a, b])
    }
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.apply(PrimitiveOp::Add, &[a, b])
    }
    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.apply(PrimitiveOp::Sub, &[a, b])
    }
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.apply(PrimitiveOp::Mul, &[a, b])
    }
    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.apply(PrimitiveOp::ConcatCols, &[a, b])
    }
    pub fn concat_rows(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.apply(PrimitiveOp::ConcatRows, &[a, b])
    }

    /// Stacks same-width tensors top to bottom.
    pub fn stack_rows(&mut self, parts: &[Var]) -> Result<Var, AutodiffError> {
        let (&first, rest) = parts
            .split_first()
            .ok_or_else(|| AutodiffError::InvalidArgument("stack of zero tensors".into()))?;
        rest.iter().try_fold(first, |acc, &v| self.concat_rows(acc, v))
    }
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var, AutodiffError> {
        self.apply(PrimitiveOp::SliceCols { start, end }, &[a])
    }
    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Result<Var, AutodiffError> {
        self.apply(PrimitiveOp::SliceRows { start, end }, &[a])
    }
    pub fn broadcast_row(&mut self, a: Var, rows: usize) -> Result<Var, AutodiffError> {
        self.apply(PrimitiveOp::BroadcastRow { rows }, &[a])
    }
    pub fn transpose(&mut self, a: Var) -> Result<Var, AutodiffError> {
        self.apply(PrimitiveOp::Transpose, &[a])
    }
    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Result<Var, AutodiffError> {
        self.apply(PrimitiveOp::Reshape { rows, cols }, &[a])
    }
    pub fn sigmoid(&mut self, a: Var) -> Result<Var, AutodiffError> {
        self.apply(PrimitiveOp::Sigmoid, &[a])
    }
    pub fn tanh(&mut self, a: Var) -> Result<Var, AutodiffError> {
        self.apply(PrimitiveOp::Tanh, &[a])
    }
    pub fn relu(&mut self, a: Var) -> Result<Var, AutodiffError> {
        self.apply(PrimitiveOp::Relu, &[a])
    }
    pub fn exp(&mut self, a: Var) -> Result<Var, AutodiffError> {
        self.apply(PrimitiveOp::Exp, &[a])
    }
    pub fn log(&mut self, a: Var) -> Result<Var, AutodiffError> {
        self.apply(PrimitiveOp::Log, &[a])
    }
    pub fn neg(&mut self, a: Var) -> Result<Var, AutodiffError> {
        self.apply(PrimitiveOp::Negate, &[a])
    }
    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var, AutodiffError> {
        self.apply(PrimitiveOp::Scale(factor), &[a])
    }
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Result<Var, AutodiffError> {
        self.apply(PrimitiveOp::Clamp { lo, hi }, &[a])
    }
    pub fn sum_all(&mut self, a: Var) -> Result<Var, AutodiffError> {
        self.apply(PrimitiveOp::SumAll, &[a])
    }
    pub fn mean_rows(&mut self, a: Var) -> Result<Var, AutodiffError> {
        self.apply(PrimitiveOp::MeanRows, &[a])
    }
    pub fn mean_all(&mut self, a: Var) -> Result<Var, AutodiffError> {
        self.apply(PrimitiveOp::MeanAll, &[a])
    }
    pub fn softmax_rows(&mut self, a: Var) -> Result<Var, AutodiffError> {
        self.apply(PrimitiveOp::SoftmaxRows, &[a])
    }

    /// `relu(x) - slope * relu(-x)`.
    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Result<Var, AutodiffError> {
        let pos = self.relu(a)?;
        let flipped = self.neg(a)?;
        let neg = self.relu(flipped)?;
        let neg = self.scale(neg, slope)?;
        self.sub(pos, neg)
    }

    /// `x * W + b` with `b` broadcast over rows.
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Result<Var, AutodiffError> {
        let xw = self.matmul(x, w)?;
        self.add(xw, b)
    }

    /// Reverse sweep from a 1x1 output.
    pub fn backward(&self, output: Var) -> Result<Gradients, AutodiffError> {
        let shape = self.shape(output);
        if shape != (1, 1) {
            return Err(AutodiffError::NotScalar { shape });
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; output.0 + 1];
        grads[output.0] = Some(Tensor::scalar(1.0));
        for idx in (0..=output.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.tracked {
                continue;
            }
            match &node.op {
                NodeOp::Constant => {}
                NodeOp::Leaf => grads[idx] = Some(g),
                NodeOp::Apply { op, inputs, broadcast } => {
                    self.propagate(op, *inputs, *broadcast, &node.value, &g, &mut grads);
                }
            }
        }
        let mut by_leaf = BTreeMap::new();
        for (idx, node) in self.nodes.iter().enumerate() {
            if matches!(node.op, NodeOp::Leaf) {
                let (r, c) = node.value.shape();
                let g = grads
                    .get_mut(idx)
                    .and_then(Option::take)
                    .unwrap_or_else(|| Tensor::zeros(r, c));
                by_leaf.insert(Var(idx), g);
            }
        }
        Ok(Gradients { by_leaf })
    }

    fn propagate(
        &self,
        op: &PrimitiveOp,
        inputs: [usize; 2],
        broadcast: bool,
        out: &Tensor,
        g: &Tensor,
        grads: &mut [Option<Tensor>],
    ) {
        let a = &self.nodes[inputs[0]].value;
        let b = (inputs[1] != usize::MAX).then(|| &self.nodes[inputs[1]].value);
        let (ar, ac) = a.shape();
        match op {
            PrimitiveOp::MatMul => {
                let b = b.expect("binary op");
                let (k, n) = b.shape();
                if self.nodes[inputs[0]].tracked {
                    let slot = grads[inputs[0]].get_or_insert_with(|| Tensor::zeros(ar, ac));
                    matmul_nt_into(g.data(), b.data(), ar, n, k, slot.data_mut());
                }
                if self.nodes[inputs[1]].tracked {
                    let slot = grads[inputs[1]].get_or_insert_with(|| Tensor::zeros(k, n));
                    matmul_tn_into(a.data(), g.data(), ar, ac, n, slot.data_mut());
                }
            }
            PrimitiveOp::Add | PrimitiveOp::Sub => {
                accumulate(grads, inputs[0], g.clone());
                let gb = if broadcast { col_sums(g) } else { g.clone() };
                let gb = if matches!(op, PrimitiveOp::Sub) {
                    gb.scaled(-1.0)
                } else {
                    gb
                };
                accumulate(grads, inputs[1], gb);
            }
            PrimitiveOp::Mul => {
                let b = b.expect("binary op");
                let bc = b.cols();
                let mut ga = Tensor::zeros(ar, ac);
                let mut gb_full = Tensor::zeros(ar, ac);
                for i in 0..ar * ac {
                    let bv = if broadcast { b.data()[i % bc] } else { b.data()[i] };
                    ga.data_mut()[i] = g.data()[i] * bv;
                    gb_full.data_mut()[i] = g.data()[i] * a.data()[i];
                }
                accumulate(grads, inputs[0], ga);
                let gb = if broadcast { col_sums(&gb_full) } else { gb_full };
                accumulate(grads, inputs[1], gb);
            }
            PrimitiveOp::ConcatCols => {
                let b = b.expect("binary op");
                let bc = b.cols();
                let oc = ac + bc;
                let mut ga = Tensor::zeros(ar, ac);
                let mut gb = Tensor::zeros(ar, bc);
                for r in 0..ar {
                    let grow = &g.data()[r * oc..(r + 1) * oc];
                    ga.data_mut()[r * ac..(r + 1) * ac].copy_from_slice(&grow[..ac]);
                    gb.data_mut()[r * bc..(r + 1) * bc].copy_from_slice(&grow[ac..]);
                }
                accumulate(grads, inputs[0], ga);
                accumulate(grads, inputs[1], gb);
            }
            PrimitiveOp::ConcatRows => {
                let split = ar * ac;
                accumulate(
                    grads,
                    inputs[0],
                    Tensor::new(ar, ac, g.data()[..split].to_vec()).expect("split"),
                );
                let br = g.rows() - ar;
                accumulate(
                    grads,
                    inputs[1],
                    Tensor::new(br, ac, g.data()[split..].to_vec()).expect("split"),
                );
            }
            PrimitiveOp::SliceCols { start, end } => {
                let w = end - start;
                let mut ga = Tensor::zeros(ar, ac);
                for r in 0..ar {
                    ga.data_mut()[r * ac + start..r * ac + end].copy_from_slice(&g.data()[r * w..(r + 1) * w]);
                }
                accumulate(grads, inputs[0], ga);
            }
            PrimitiveOp::SliceRows { start, end } => {
                let mut ga = Tensor::zeros(ar, ac);
                ga.data_mut()[start * ac..end * ac].copy_from_slice(g.data());
                accumulate(grads, inputs[0], ga);
            }
            PrimitiveOp::BroadcastRow { .. } => accumulate(grads, inputs[0], col_sums(g)),
            PrimitiveOp::Transpose => accumulate(grads, inputs[0], g.transpose()),
            PrimitiveOp::Reshape { .. } => {
                let ga = Tensor::new(ar, ac, g.data().to_vec()).expect("same length");
                accumulate(grads, inputs[0], ga);
            }
            PrimitiveOp::Sigmoid => {
                accumulate(grads, inputs[0], zip_map(g, out, |g, y| g * y * (1.0 - y)));
            }
            PrimitiveOp::Tanh => {
                accumulate(grads, inputs[0], zip_map(g, out, |g, y| g * (1.0 - y * y)));
            }
            PrimitiveOp::Relu => {
                accumulate(grads, inputs[0], zip_map(g, a, |g, x| if x > 0.0 { g } else { 0.0 }));
            }
            PrimitiveOp::Exp => accumulate(grads, inputs[0], zip_map(g, out, |g, y| g * y)),
            PrimitiveOp::Log => accumulate(grads, inputs[0], zip_map(g, a, |g, x| g / x)),
            PrimitiveOp::Negate => accumulate(grads, inputs[0], g.scaled(-1.0)),
            PrimitiveOp::Scale(f) => accumulate(grads, inputs[0], g.scaled(*f)),
            PrimitiveOp::Clamp { lo, hi } => {
                let (lo, hi) = (*lo, *hi);
                accumulate(
                    grads,
                    inputs[0],
                    zip_map(g, a, |g, x| if x >= lo && x <= hi { g } else { 0.0 }),
                );
            }
            PrimitiveOp::SumAll => {
                accumulate(grads, inputs[0], Tensor::filled(ar, ac, g.data()[0]));
            }
            PrimitiveOp::MeanAll => {
                let v = g.data()[0] / (ar * ac) as f64;
                accumulate(grads, inputs[0], Tensor::filled(ar, ac, v));
            }
            PrimitiveOp::MeanRows => {
                let inv = 1.0 / ar as f64;
                let mut ga = Tensor::zeros(ar, ac);
                for r in 0..ar {
                    for c in 0..ac {
                        ga.data_mut()[r * ac + c] = g.data()[c] * inv;
                    }
                }
                accumulate(grads, inputs[0], ga);
            }
            PrimitiveOp::SoftmaxRows => {
                let mut ga = Tensor::zeros(ar, ac);
                for r in 0..ar {
                    let y = out.row(r);
                    let gr = g.row(r);
                    let dot: f64 = y.iter().zip(gr).map(|(y, g)| y * g).sum();
                    for c in 0..ac {
                        ga.data_mut()[r * ac + c] = y[c] * (gr[c] - dot);
                    }
                }
                accumulate(grads, inputs[0], ga);
            }
        }
    }
}

fn accumulate(grads: &mut [Option<Tensor>], idx: usize, g: Tensor) {
    match &mut grads[idx] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

fn col_sums(t: &Tensor) -> Tensor {
    let (r, c) = t.shape();
    let mut out = vec![0.0; c];
    for i in 0..r {
        for (o, v) in out.iter_mut().zip(t.row(i)) {
            *o += v;
        }
    }
    Tensor::row_vector(out)
}

fn zip_map(g: &Tensor, x: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = g.data().iter().zip(x.data()).map(|(&g, &x)| f(g, x)).collect();
    Tensor::new(g.rows(), g.cols(), data).expect("same shape")
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn shape_err(op: &PrimitiveOp, a: &Tensor, b: &Tensor) -> AutodiffError {
    AutodiffError::ShapeMismatch {
        op: op.name(),
        lhs: a.shape(),
        rhs: b.shape(),
    }
}

/// Forward semantics of every primitive. Returns the value and whether the
/// right operand was row-broadcast.
fn forward(op: &PrimitiveOp, a: &Tensor, b: Option<&Tensor>) -> Result<(Tensor, bool), AutodiffError> {
    let (ar, ac) = a.shape();
    let out = match op {
        PrimitiveOp::MatMul => {
            let b = b.expect("arity checked");
            if ac != b.rows() {
                return Err(shape_err(op, a, b));
            }
            let n = b.cols();
            let mut data = vec![0.0; ar * n];
            matmul_into(a.data(), b.data(), ar, ac, n, &mut data);
            Tensor::new(ar, n, data)?
        }
        PrimitiveOp::Add | PrimitiveOp::Sub | PrimitiveOp::Mul => {
            let b = b.expect("arity checked");
            let broadcast = if b.shape() == a.shape() {
                false
            } else if b.rows() == 1 && b.cols() == ac {
                true
            } else {
                return Err(shape_err(op, a, b));
            };
            let f: fn(f64, f64) -> f64 = match op {
                PrimitiveOp::Add => |x, y| x + y,
                PrimitiveOp::Sub => |x, y| x - y,
                _ => |x, y| x * y,
            };
            let data = a
                .data()
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    let y = if broadcast { b.data()[i % ac] } else { b.data()[i] };
                    f(x, y)
                })
                .collect();
            return Ok((Tensor::new(ar, ac, data)?, broadcast));
        }
        PrimitiveOp::ConcatCols => {
            let b = b.expect("arity checked");
            if b.rows() != ar {
                return Err(shape_err(op, a, b));
            }
            let bc = b.cols();
            let mut data = Vec::with_capacity(ar * (ac + bc));
            for r in 0..ar {
                data.extend_from_slice(a.row(r));
                data.extend_from_slice(b.row(r));
            }
            Tensor::new(ar, ac + bc, data)?
        }
        PrimitiveOp::ConcatRows => {
            let b = b.expect("arity checked");
            if b.cols() != ac {
                return Err(shape_err(op, a, b));
            }
            let mut data = Vec::with_capacity(a.len() + b.len());
            data.extend_from_slice(a.data());
            data.extend_from_slice(b.data());
            Tensor::new(ar + b.rows(), ac, data)?
        }
        PrimitiveOp::SliceCols { start, end } => {
            if start >= end || *end > ac {
                return Err(AutodiffError::InvalidArgument(format!(
                    "slice-cols {start}..{end} out of range for {ar}x{ac}"
                )));
            }
            let mut data = Vec::with_capacity(ar * (end - start));
            for r in 0..ar {
                data.extend_from_slice(&a.row(r)[*start..*end]);
            }
            Tensor::new(ar, end - start, data)?
        }
        PrimitiveOp::SliceRows { start, end } => {
            if start >= end || *end > ar {
                return Err(AutodiffError::InvalidArgument(format!(
                    "slice-rows {start}..{end} out of range for {ar}x{ac}"
                )));
            }
            Tensor::new(end - start, ac, a.data()[start * ac..end * ac].to_vec())?
        }
        PrimitiveOp::BroadcastRow { rows } => {
            if ar != 1 || *rows == 0 {
                return Err(AutodiffError::InvalidArgument(format!(
                    "broadcast-row needs a 1 x c input and rows > 0, got {ar}x{ac} -> {rows}"
                )));
            }
            Tensor::new(*rows, ac, a.data().repeat(*rows))?
        }
        PrimitiveOp::Transpose => a.transpose(),
        PrimitiveOp::Reshape { rows, cols } => {
            if rows * cols != ar * ac {
                return Err(AutodiffError::InvalidArgument(format!(
                    "cannot reshape {ar}x{ac} into {rows}x{cols}"
                )));
            }
            Tensor::new(*rows, *cols, a.data().to_vec())?
        }
        PrimitiveOp::Sigmoid => a.map(sigmoid),
        PrimitiveOp::Tanh => a.map(f64::tanh),
        PrimitiveOp::Relu => a.map(|x| if x > 0.0 { x } else { 0.0 }),
        PrimitiveOp::Exp => a.map(f64::exp),
        PrimitiveOp::Log => {
            if let Some(&bad) = a.data().iter().find(|&&x| x <= 0.0 || x.is_nan()) {
                return Err(AutodiffError::Domain { op: "log", value: bad });
            }
            a.map(f64::ln)
        }
        PrimitiveOp::Negate => a.map(|x| -x),
        PrimitiveOp::Scale(f) => a.scaled(*f),
        PrimitiveOp::Clamp { lo, hi } => a.map(|x| x.clamp(*lo, *hi)),
        PrimitiveOp::SumAll => Tensor::scalar(a.data().iter().sum()),
        PrimitiveOp::MeanAll => {
            if a.is_empty() {
                return Err(AutodiffError::InvalidArgument("mean of empty tensor".into()));
            }
            Tensor::scalar(a.data().iter().sum::<f64>() / a.len() as f64)
        }
        PrimitiveOp::MeanRows => {
            if ar == 0 {
                return Err(AutodiffError::InvalidArgument("mean-rows of zero rows".into()));
            }
            let mut sums = vec![0.0; ac];
            for r in 0..ar {
                for (s, v) in sums.iter_mut().zip(a.row(r)) {
                    *s += v;
                }
            }
            let inv = ar as f64;
            Tensor::row_vector(sums.into_iter().map(|s| s / inv).collect())
        }
        PrimitiveOp::SoftmaxRows => {
            let mut data = Vec::with_capacity(ar * ac);
            for r in 0..ar {
                let row = a.row(r);
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = row.iter().map(|x| (x - max).exp()).collect();
                let total: f64 = exps.iter().sum();
                data.extend(exps.into_iter().map(|e| e / total));
            }
            Tensor::new(ar, ac, data)?
        }
    };
    Ok((out, false))
}
