//! Reverse-mode automatic differentiation over dense tensors.
//!
//! A [`Tape`] records every operation as it is evaluated. Nodes are appended
//! in evaluation order, so the node list is already a topological order and
//! [`Tape::backward`] is a single reverse sweep. Each operation carries its
//! own backward rule (see [`Op`]); there are no higher-order derivatives.
//!
//! ```
//! use lsr::numerics::{Tape, Tensor};
//!
//! let mut tape = Tape::new();
//! let x = tape.leaf(Tensor::row_vector(&[1.0, 2.0]));
//! let xt = tape.transpose(x).unwrap();
//! let loss = tape.matmul(x, xt).unwrap(); // xᵀx
//! let grads = tape.backward(loss).unwrap();
//! assert_eq!(grads.wrt(&tape, x).data(), &[2.0, 4.0]);
//! ```

use super::linalg::{inverse_and_logdet, lu_decompose};
use super::{NumericsError, Tensor};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRowBias(Var, Var),
    Affine(Var, f64),
    MulConst(Var, Tensor),
    AddConst(Var),
    Tanh(Var),
    Relu(Var),
    Sigmoid(Var),
    Exp(Var),
    Ln(Var),
    Clamp(Var, f64, f64),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    MeanRows(Var),
    SliceRows(Var, usize),
    SliceCols(Var, usize),
    GatherRows(Var, Vec<usize>),
    Transpose(Var),
    Reshape(Var),
    Sum(Var),
    ColSum(Var),
    Diag(Var),
    DiagEmbed(Var),
    ReplaceRow(Var, usize, Var),
    BroadcastRows(Var),
    Inverse(Var),
    /// Keeps `A⁻ᵀ`, the gradient of `log |det A|`.
    LogDet(Var, Tensor),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Single-owner computation record.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients produced by one backward sweep, indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient with respect to `v`, zeros if `v` did not influence the loss.
    pub fn wrt(&self, tape: &Tape, v: Var) -> Tensor {
        self.get(v)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(tape.value(v).shape()))
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

fn mismatch(op: &'static str, a: &Tensor, b: &Tensor) -> NumericsError {
    NumericsError::ShapeMismatch {
        op,
        left: a.shape().to_vec(),
        right: b.shape().to_vec(),
    }
}

fn accumulate(slot: &mut Option<Tensor>, g: Tensor) {
    match slot {
        Some(acc) => acc.add_assign(&g),
        None => *slot = Some(g),
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

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// A differentiable input.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    /// A non-differentiable input.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    fn push(&mut self, op: &'static str, value: Tensor, node_op: Op) -> Result<Var, NumericsError> {
        if !value.all_finite() {
            return Err(NumericsError::NonFinite { op });
        }
        let requires_grad = self.parents(&node_op).iter().any(|p| self.nodes[p.0].requires_grad);
        self.nodes.push(Node {
            value,
            op: node_op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn parents(&self, op: &Op) -> Vec<Var> {
        match op {
            Op::Leaf => vec![],
            Op::MatMul(a, b)
            | Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::Mul(a, b)
            | Op::AddRowBias(a, b)
            | Op::ReplaceRow(a, _, b) => vec![*a, *b],
            Op::ConcatCols(vs) | Op::ConcatRows(vs) => vs.clone(),
            Op::Affine(a, _)
            | Op::MulConst(a, _)
            | Op::AddConst(a)
            | Op::Tanh(a)
            | Op::Relu(a)
            | Op::Sigmoid(a)
            | Op::Exp(a)
            | Op::Ln(a)
            | Op::Clamp(a, _, _)
            | Op::MeanRows(a)
            | Op::SliceRows(a, _)
            | Op::SliceCols(a, _)
            | Op::GatherRows(a, _)
            | Op::Transpose(a)
            | Op::Reshape(a)
            | Op::Sum(a)
            | Op::ColSum(a)
            | Op::Diag(a)
            | Op::DiagEmbed(a)
            | Op::BroadcastRows(a)
            | Op::Inverse(a)
            | Op::LogDet(a, _) => vec![*a],
        }
    }

    fn matrix(&self, op: &'static str, v: Var) -> Result<&Tensor, NumericsError> {
        let t = self.value(v);
        if !t.is_matrix() {
            return Err(NumericsError::NotMatrix {
                op,
                shape: t.shape().to_vec(),
            });
        }
        Ok(t)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        let (ta, tb) = (self.matrix("matmul", a)?, self.matrix("matmul", b)?);
        if ta.cols() != tb.rows() {
            return Err(mismatch("matmul", ta, tb));
        }
        let out = ta.matmul(tb);
        self.push("matmul", out, Op::MatMul(a, b))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(), NumericsError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(mismatch(op, ta, tb));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        self.same_shape("add", a, b)?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x + y);
        self.push("add", out, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        self.same_shape("sub", a, b)?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x - y);
        self.push("sub", out, Op::Sub(a, b))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        self.same_shape("mul", a, b)?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x * y);
        self.push("mul", out, Op::Mul(a, b))
    }

    /// `a + 1·b` where `b` is a `1 × cols` row added to every row of `a`.
    pub fn add_row_bias(&mut self, a: Var, bias: Var) -> Result<Var, NumericsError> {
        let (ta, tb) = (self.matrix("add_row_bias", a)?, self.value(bias));
        if tb.shape() != [1, ta.cols()] {
            return Err(mismatch("add_row_bias", ta, tb));
        }
        let c = ta.cols();
        let mut out = ta.clone();
        for (i, v) in out.data_mut().iter_mut().enumerate() {
            *v += tb.data()[i % c];
        }
        self.push("add_row_bias", out, Op::AddRowBias(a, bias))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var, NumericsError> {
        self.affine(a, c, 0.0)
    }

    /// `scale · a + shift` with constant scalars.
    pub fn affine(&mut self, a: Var, scale: f64, shift: f64) -> Result<Var, NumericsError> {
        let out = self.value(a).map(|x| scale * x + shift);
        self.push("affine", out, Op::Affine(a, scale))
    }

    /// Elementwise product with a constant tensor (masks, targets, dropout).
    pub fn mul_const(&mut self, a: Var, c: Tensor) -> Result<Var, NumericsError> {
        let ta = self.value(a);
        if ta.shape() != c.shape() {
            return Err(mismatch("mul_const", ta, &c));
        }
        let out = ta.zip_map(&c, |x, y| x * y);
        self.push("mul_const", out, Op::MulConst(a, c))
    }

    /// Adds a constant tensor.
    pub fn add_const(&mut self, a: Var, c: &Tensor) -> Result<Var, NumericsError> {
        let ta = self.value(a);
        if ta.shape() != c.shape() {
            return Err(mismatch("add_const", ta, c));
        }
        let out = ta.zip_map(c, |x, y| x + y);
        self.push("add_const", out, Op::AddConst(a))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var, NumericsError> {
        let out = self.value(a).map(f64::tanh);
        self.push("tanh", out, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var, NumericsError> {
        let out = self.value(a).map(|x| x.max(0.0));
        self.push("relu", out, Op::Relu(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var, NumericsError> {
        let out = self.value(a).map(sigmoid);
        self.push("sigmoid", out, Op::Sigmoid(a))
    }

    pub fn exp(&mut self, a: Var) -> Result<Var, NumericsError> {
        let out = self.value(a).map(f64::exp);
        self.push("exp", out, Op::Exp(a))
    }

    pub fn ln(&mut self, a: Var) -> Result<Var, NumericsError> {
        let out = self.value(a).map(f64::ln);
        self.push("ln", out, Op::Ln(a))
    }

    /// Clamp into `[lo, hi]`; the gradient is zero outside the open interval.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Result<Var, NumericsError> {
        let out = self.value(a).map(|x| x.clamp(lo, hi));
        self.push("clamp", out, Op::Clamp(a, lo, hi))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, NumericsError> {
        let Some(&first) = parts.first() else {
            return Err(NumericsError::Empty { op: "concat_cols" });
        };
        let rows = self.matrix("concat_cols", first)?.rows();
        let mut total = 0;
        for &p in parts {
            let t = self.matrix("concat_cols", p)?;
            if t.rows() != rows {
                return Err(mismatch("concat_cols", self.value(first), t));
            }
            total += t.cols();
        }
        let mut data = Vec::with_capacity(rows * total);
        for i in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row(i));
            }
        }
        let out = Tensor::new(vec![rows, total], data)?;
        self.push("concat_cols", out, Op::ConcatCols(parts.to_vec()))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var, NumericsError> {
        let Some(&first) = parts.first() else {
            return Err(NumericsError::Empty { op: "concat_rows" });
        };
        let cols = self.matrix("concat_rows", first)?.cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let t = self.matrix("concat_rows", p)?;
            if t.cols() != cols {
                return Err(mismatch("concat_rows", self.value(first), t));
            }
            rows += t.rows();
            data.extend_from_slice(t.data());
        }
        let out = Tensor::new(vec![rows, cols], data)?;
        self.push("concat_rows", out, Op::ConcatRows(parts.to_vec()))
    }

    /// Column means, `1 × cols`.
    pub fn mean_rows(&mut self, a: Var) -> Result<Var, NumericsError> {
        let t = self.matrix("mean_rows", a)?;
        if t.rows() == 0 {
            return Err(NumericsError::Empty { op: "mean_rows" });
        }
        let inv = 1.0 / t.rows() as f64;
        let out = col_sums(t).scale(inv);
        self.push("mean_rows", out, Op::MeanRows(a))
    }

    /// Rows `start..end`.
    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Result<Var, NumericsError> {
        let t = self.matrix("slice_rows", a)?;
        if start > end || end > t.rows() {
            return Err(NumericsError::OutOfRange {
                op: "slice_rows",
                start,
                end,
                len: t.rows(),
            });
        }
        let c = t.cols();
        let out = Tensor::new(vec![end - start, c], t.data()[start * c..end * c].to_vec())?;
        self.push("slice_rows", out, Op::SliceRows(a, start))
    }

    /// Columns `start..end`.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var, NumericsError> {
        let t = self.matrix("slice_cols", a)?;
        if start > end || end > t.cols() {
            return Err(NumericsError::OutOfRange {
                op: "slice_cols",
                start,
                end,
                len: t.cols(),
            });
        }
        let mut data = Vec::with_capacity(t.rows() * (end - start));
        for i in 0..t.rows() {
            data.extend_from_slice(&t.row(i)[start..end]);
        }
        let out = Tensor::new(vec![t.rows(), end - start], data)?;
        self.push("slice_cols", out, Op::SliceCols(a, start))
    }

    /// Picks rows by index; indices may repeat.
    pub fn gather_rows(&mut self, a: Var, idx: &[usize]) -> Result<Var, NumericsError> {
        let t = self.matrix("gather_rows", a)?;
        let mut data = Vec::with_capacity(idx.len() * t.cols());
        for &i in idx {
            if i >= t.rows() {
                return Err(NumericsError::OutOfRange {
                    op: "gather_rows",
                    start: i,
                    end: i + 1,
                    len: t.rows(),
                });
            }
            data.extend_from_slice(t.row(i));
        }
        let out = Tensor::new(vec![idx.len(), t.cols()], data)?;
        self.push("gather_rows", out, Op::GatherRows(a, idx.to_vec()))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var, NumericsError> {
        let out = self.matrix("transpose", a)?.transpose();
        self.push("transpose", out, Op::Transpose(a))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var, NumericsError> {
        let out = self.value(a).reshape(shape)?;
        self.push("reshape", out, Op::Reshape(a))
    }

    /// Sum of all entries as a `1 × 1` tensor.
    pub fn sum(&mut self, a: Var) -> Result<Var, NumericsError> {
        let out = Tensor::scalar(self.value(a).sum());
        self.push("sum", out, Op::Sum(a))
    }

    /// Column sums, `1 × cols`.
    pub fn col_sum(&mut self, a: Var) -> Result<Var, NumericsError> {
        let out = col_sums(self.matrix("col_sum", a)?);
        self.push("col_sum", out, Op::ColSum(a))
    }

    /// Diagonal of a square matrix as `1 × n`.
    pub fn diag(&mut self, a: Var) -> Result<Var, NumericsError> {
        let t = self.value(a);
        if !t.is_square() {
            return Err(NumericsError::NotSquare {
                op: "diag",
                shape: t.shape().to_vec(),
            });
        }
        let d: Vec<f64> = (0..t.rows()).map(|i| t.get(i, i)).collect();
        self.push("diag", Tensor::row_vector(&d), Op::Diag(a))
    }

    /// `1 × n` row to an `n × n` diagonal matrix.
    pub fn diag_embed(&mut self, a: Var) -> Result<Var, NumericsError> {
        let t = self.matrix("diag_embed", a)?;
        if t.rows() != 1 {
            return Err(NumericsError::NotMatrix {
                op: "diag_embed",
                shape: t.shape().to_vec(),
            });
        }
        let n = t.cols();
        let mut out = Tensor::zeros(&[n, n]);
        for i in 0..n {
            out.set(i, i, t.data()[i]);
        }
        self.push("diag_embed", out, Op::DiagEmbed(a))
    }

    /// Copy of `a` with row `row` replaced by the `1 × cols` tensor `r`.
    pub fn replace_row(&mut self, a: Var, row: usize, r: Var) -> Result<Var, NumericsError> {
        let (ta, tr) = (self.matrix("replace_row", a)?, self.value(r));
        if tr.shape() != [1, ta.cols()] {
            return Err(mismatch("replace_row", ta, tr));
        }
        if row >= ta.rows() {
            return Err(NumericsError::OutOfRange {
                op: "replace_row",
                start: row,
                end: row + 1,
                len: ta.rows(),
            });
        }
        let c = ta.cols();
        let mut out = ta.clone();
        out.data_mut()[row * c..(row + 1) * c].copy_from_slice(tr.data());
        self.push("replace_row", out, Op::ReplaceRow(a, row, r))
    }

    /// Repeats a `1 × cols` row `n` times.
    pub fn broadcast_rows(&mut self, a: Var, n: usize) -> Result<Var, NumericsError> {
        let t = self.matrix("broadcast_rows", a)?;
        if t.rows() != 1 {
            return Err(NumericsError::NotMatrix {
                op: "broadcast_rows",
                shape: t.shape().to_vec(),
            });
        }
        let mut data = Vec::with_capacity(n * t.cols());
        for _ in 0..n {
            data.extend_from_slice(t.data());
        }
        let out = Tensor::new(vec![n, t.cols()], data)?;
        self.push("broadcast_rows", out, Op::BroadcastRows(a))
    }

    /// Matrix inverse via partial-pivoting LU.
    pub fn inverse(&mut self, a: Var) -> Result<Var, NumericsError> {
        let lu = lu_decompose(self.value(a))?;
        let out = lu.inverse();
        self.push("inverse", out, Op::Inverse(a))
    }

    /// `log |det A|` as a `1 × 1` tensor, plus the determinant sign.
    pub fn logdet(&mut self, a: Var) -> Result<(Var, f64), NumericsError> {
        let (inv, logdet, sign) = inverse_and_logdet(self.value(a))?;
        let v = self.push("logdet", Tensor::scalar(logdet), Op::LogDet(a, inv.transpose()))?;
        Ok((v, sign))
    }

    /// Reverse sweep from a scalar loss.
    pub fn backward(&self, loss: Var) -> Result<Gradients, NumericsError> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(NumericsError::NonScalarLoss {
                shape: lv.shape().to_vec(),
            });
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::filled(lv.shape(), 1.0));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            for (parent, pg) in self.local_backward(node, &g) {
                if self.nodes[parent.0].requires_grad {
                    accumulate(&mut grads[parent.0], pg);
                }
            }
            // leaves keep theirs; interior gradients are dropped once consumed
        }
        Ok(Gradients { grads })
    }

    fn local_backward(&self, node: &Node, g: &Tensor) -> Vec<(Var, Tensor)> {
        let y = &node.value;
        match &node.op {
            Op::Leaf => vec![],
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                vec![(*a, g.matmul_t(tb)), (*b, ta.t_matmul(g))]
            }
            Op::Add(a, b) => vec![(*a, g.clone()), (*b, g.clone())],
            Op::Sub(a, b) => vec![(*a, g.clone()), (*b, g.scale(-1.0))],
            Op::Mul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                vec![
                    (*a, g.zip_map(tb, |x, y| x * y)),
                    (*b, g.zip_map(ta, |x, y| x * y)),
                ]
            }
            Op::AddRowBias(a, b) => vec![(*a, g.clone()), (*b, col_sums(g))],
            Op::Affine(a, s) => vec![(*a, g.scale(*s))],
            Op::MulConst(a, c) => vec![(*a, g.zip_map(c, |x, y| x * y))],
            Op::AddConst(a) => vec![(*a, g.clone())],
            Op::Tanh(a) => vec![(*a, g.zip_map(y, |gi, yi| gi * (1.0 - yi * yi)))],
            Op::Relu(a) => {
                let x = self.value(*a);
                vec![(*a, g.zip_map(x, |gi, xi| if xi > 0.0 { gi } else { 0.0 }))]
            }
            Op::Sigmoid(a) => vec![(*a, g.zip_map(y, |gi, yi| gi * yi * (1.0 - yi)))],
            Op::Exp(a) => vec![(*a, g.zip_map(y, |gi, yi| gi * yi))],
            Op::Ln(a) => {
                let x = self.value(*a);
                vec![(*a, g.zip_map(x, |gi, xi| gi / xi))]
            }
            Op::Clamp(a, lo, hi) => {
                let x = self.value(*a);
                vec![(
                    *a,
                    g.zip_map(x, |gi, xi| if xi > *lo && xi < *hi { gi } else { 0.0 }),
                )]
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                let mut out = Vec::with_capacity(parts.len());
                for &p in parts {
                    let t = self.value(p);
                    let (r, c) = (t.rows(), t.cols());
                    let mut data = Vec::with_capacity(r * c);
                    for i in 0..r {
                        data.extend_from_slice(&g.row(i)[offset..offset + c]);
                    }
                    out.push((p, Tensor::new(vec![r, c], data).expect("concat grad")));
                    offset += c;
                }
                out
            }
            Op::ConcatRows(parts) => {
                let cols = g.cols();
                let mut offset = 0;
                let mut out = Vec::with_capacity(parts.len());
                for &p in parts {
                    let r = self.value(p).rows();
                    let data = g.data()[offset * cols..(offset + r) * cols].to_vec();
                    out.push((p, Tensor::new(vec![r, cols], data).expect("concat grad")));
                    offset += r;
                }
                out
            }
            Op::MeanRows(a) => {
                let r = self.value(*a).rows();
                let row = g.scale(1.0 / r as f64);
                vec![(*a, tile_rows(&row, r))]
            }
            Op::SliceRows(a, start) => {
                let t = self.value(*a);
                let c = t.cols();
                let mut out = Tensor::zeros(t.shape());
                out.data_mut()[start * c..start * c + g.len()].copy_from_slice(g.data());
                vec![(*a, out)]
            }
            Op::SliceCols(a, start) => {
                let t = self.value(*a);
                let mut out = Tensor::zeros(t.shape());
                let w = g.cols();
                for i in 0..t.rows() {
                    for j in 0..w {
                        out.set(i, start + j, g.get(i, j));
                    }
                }
                vec![(*a, out)]
            }
            Op::GatherRows(a, idx) => {
                let t = self.value(*a);
                let c = t.cols();
                let mut out = Tensor::zeros(t.shape());
                for (k, &i) in idx.iter().enumerate() {
                    let dst = &mut out.data_mut()[i * c..(i + 1) * c];
                    for (d, s) in dst.iter_mut().zip(g.row(k)) {
                        *d += s;
                    }
                }
                vec![(*a, out)]
            }
            Op::Transpose(a) => vec![(*a, g.transpose())],
            Op::Reshape(a) => {
                let shape = self.value(*a).shape().to_vec();
                vec![(*a, g.reshape(&shape).expect("reshape grad"))]
            }
            Op::Sum(a) => {
                let shape = self.value(*a).shape().to_vec();
                vec![(*a, Tensor::filled(&shape, g.data()[0]))]
            }
            Op::ColSum(a) => {
                let r = self.value(*a).rows();
                vec![(*a, tile_rows(g, r))]
            }
            Op::Diag(a) => {
                let n = g.cols();
                let mut out = Tensor::zeros(&[n, n]);
                for i in 0..n {
                    out.set(i, i, g.data()[i]);
                }
                vec![(*a, out)]
            }
            Op::DiagEmbed(a) => {
                let n = g.rows();
                let d: Vec<f64> = (0..n).map(|i| g.get(i, i)).collect();
                vec![(*a, Tensor::row_vector(&d))]
            }
            Op::ReplaceRow(a, row, r) => {
                let c = g.cols();
                let mut ga = g.clone();
                ga.data_mut()[row * c..(row + 1) * c].iter_mut().for_each(|v| *v = 0.0);
                let gr = Tensor::row_vector(g.row(*row));
                vec![(*a, ga), (*r, gr)]
            }
            Op::BroadcastRows(a) => vec![(*a, col_sums(g))],
            Op::Inverse(a) => {
                // d(A⁻¹) = −A⁻¹ dA A⁻¹  ⇒  ∂/∂A = −A⁻ᵀ G A⁻ᵀ
                vec![(*a, y.t_matmul(g).matmul_t(y).scale(-1.0))]
            }
            Op::LogDet(a, inv_t) => vec![(*a, inv_t.scale(g.data()[0]))],
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn col_sums(t: &Tensor) -> Tensor {
    let c = t.cols();
    let mut out = vec![0.0; c];
    for i in 0..t.rows() {
        for (o, v) in out.iter_mut().zip(t.row(i)) {
            *o += v;
        }
    }
    Tensor::row_vector(&out)
}

fn tile_rows(row: &Tensor, n: usize) -> Tensor {
    let mut data = Vec::with_capacity(n * row.len());
    for _ in 0..n {
        data.extend_from_slice(row.data());
    }
    Tensor::new(vec![n, row.len()], data).expect("tile")
}
