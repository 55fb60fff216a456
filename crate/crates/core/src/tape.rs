//! Reverse-mode differentiation over matrix operations.
//!
//! A [`Tape`] records every operation of one forward pass in execution order
//! (a Wengert list); [`Tape::backward`] replays the list in reverse and
//! accumulates adjoints by the chain rule. Tapes are define-by-run: each
//! forward pass builds a fresh tape, which keeps recurrent structures whose
//! depth varies per sample simple and correct.
//!
//! A tape is single-threaded; run independent tapes for parallelism.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::{softmax_rows, Matrix};

/// Handle to a value recorded on a [`Tape`]. Only meaningful for the tape
/// that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Hadamard(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Transpose(Var),
    RowSums(Var),
    /// Elementwise x^c; operand entries must stay positive for fractional c.
    PowElem(Var, f64),
    /// out[i,j] = a[i,j] * d[i] with d a column vector.
    ScaleRows(Var, Var),
    /// out[i,j] = a[i,j] * d[j] with d a column vector of length cols.
    ScaleCols(Var, Var),
    MeanRows(Var),
    Sum(Var),
    StackRows(Vec<Var>),
    SoftmaxCrossEntropy(Var, Vec<usize>),
}

struct Node {
    value: Matrix,
    op: Op,
    /// True when any transitive operand is a parameter; backward skips the
    /// rest of the graph.
    needs_grad: bool,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Adjoints produced by [`Tape::backward`], indexed by [`Var`].
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    /// Gradient of the root with respect to `v`, if `v` was on a
    /// differentiable path.
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        self.grads[v.0].as_ref()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Value held at `v`.
    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    /// Records a constant leaf: no gradient is tracked through it.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Records a parameter leaf: `backward` reports its adjoint.
    pub fn param(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, true)
    }

    fn push(&mut self, value: Matrix, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::MatMul(a, b), needs))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).add(self.value(b))?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Add(a, b), needs))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).sub(self.value(b))?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Sub(a, b), needs))
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).hadamard(self.value(b))?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Hadamard(a, b), needs))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a).scale(c);
        let needs = self.needs(a);
        self.push(value, Op::Scale(a, c), needs)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).relu();
        let needs = self.needs(a);
        self.push(value, Op::Relu(a), needs)
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.value(a).transpose();
        let needs = self.needs(a);
        self.push(value, Op::Transpose(a), needs)
    }

    pub fn row_sums(&mut self, a: Var) -> Var {
        let value = self.value(a).row_sums();
        let needs = self.needs(a);
        self.push(value, Op::RowSums(a), needs)
    }

    /// Elementwise power. For fractional or negative exponents every entry
    /// must be positive; a non-positive entry is reported as a zero row sum
    /// because the only caller on that path is degree normalization.
    pub fn pow_elem(&mut self, a: Var, c: f64) -> Result<Var> {
        let src = self.value(a);
        if c < 1.0 {
            for i in 0..src.rows() {
                for j in 0..src.cols() {
                    if src.get(i, j) <= 0.0 {
                        return Err(Error::ZeroRowSum { row: i });
                    }
                }
            }
        }
        let value = src.map(|x| libm::pow(x, c));
        let needs = self.needs(a);
        Ok(self.push(value, Op::PowElem(a, c), needs))
    }

    pub fn scale_rows(&mut self, a: Var, d: Var) -> Result<Var> {
        let (am, dm) = (self.value(a), self.value(d));
        if dm.cols() != 1 || dm.rows() != am.rows() {
            return Err(Error::ShapeMismatch {
                op: "scale_rows",
                lhs: am.shape(),
                rhs: dm.shape(),
            });
        }
        let value = Matrix::from_fn(am.rows(), am.cols(), |i, j| am.get(i, j) * dm.get(i, 0));
        let needs = self.needs(a) || self.needs(d);
        Ok(self.push(value, Op::ScaleRows(a, d), needs))
    }

    pub fn scale_cols(&mut self, a: Var, d: Var) -> Result<Var> {
        let (am, dm) = (self.value(a), self.value(d));
        if dm.cols() != 1 || dm.rows() != am.cols() {
            return Err(Error::ShapeMismatch {
                op: "scale_cols",
                lhs: am.shape(),
                rhs: dm.shape(),
            });
        }
        let value = Matrix::from_fn(am.rows(), am.cols(), |i, j| am.get(i, j) * dm.get(j, 0));
        let needs = self.needs(a) || self.needs(d);
        Ok(self.push(value, Op::ScaleCols(a, d), needs))
    }

    pub fn mean_rows(&mut self, a: Var) -> Var {
        let value = self.value(a).mean_rows();
        let needs = self.needs(a);
        self.push(value, Op::MeanRows(a), needs)
    }

    /// Sum of all entries, as a 1x1 matrix.
    pub fn sum(&mut self, a: Var) -> Var {
        let value = Matrix::from_fn(1, 1, |_, _| self.value(a).sum());
        let needs = self.needs(a);
        self.push(value, Op::Sum(a), needs)
    }

    /// Stacks k row vectors (each 1 x n) into a k x n matrix.
    pub fn stack_rows(&mut self, rows: &[Var]) -> Result<Var> {
        if rows.is_empty() {
            return Err(Error::InvalidInput("stack_rows: empty row list".into()));
        }
        let cols = self.value(rows[0]).cols();
        let mut data = Vec::with_capacity(rows.len() * cols);
        let mut needs = false;
        for &r in rows {
            let m = self.value(r);
            if m.rows() != 1 || m.cols() != cols {
                return Err(Error::ShapeMismatch {
                    op: "stack_rows",
                    lhs: (1, cols),
                    rhs: m.shape(),
                });
            }
            data.extend_from_slice(m.data());
            needs |= self.needs(r);
        }
        let value = Matrix::from_vec(rows.len(), cols, data)?;
        Ok(self.push(value, Op::StackRows(rows.to_vec()), needs))
    }

    /// Mean over rows of `-log softmax(logits)[label]`, as a 1x1 matrix.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let loss = crate::matrix::softmax_cross_entropy(self.value(logits), labels)?;
        let value = Matrix::from_fn(1, 1, |_, _| loss);
        let needs = self.needs(logits);
        Ok(self.push(value, Op::SoftmaxCrossEntropy(logits, labels.to_vec()), needs))
    }

    /// D^{-1/2} A D^{-1/2} with D the degree matrix of `a` itself.
    /// Differentiable through both the entries and the degrees.
    pub fn sym_normalize(&mut self, a: Var) -> Result<Var> {
        let degrees = self.row_sums(a);
        let inv_sqrt = self.pow_elem(degrees, -0.5)?;
        let scaled = self.scale_rows(a, inv_sqrt)?;
        self.scale_cols(scaled, inv_sqrt)
    }

    /// Reverse sweep from a 1x1 `root`. Visits every node exactly once in
    /// reverse topological (= insertion) order.
    pub fn backward(&mut self, root: Var) -> Result<Gradients> {
        let root_val = self.value(root);
        if root_val.shape() != (1, 1) {
            return Err(Error::ShapeMismatch {
                op: "backward",
                lhs: root_val.shape(),
                rhs: (1, 1),
            });
        }
        if !root_val.all_finite() {
            return Err(Error::NonFinite { op: "backward" });
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(Matrix::from_fn(1, 1, |_, _| 1.0));

        for idx in (0..=root.0).rev() {
            if !self.nodes[idx].needs_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            match self.nodes[idx].op.clone() {
                Op::Leaf => {
                    grads[idx] = Some(g);
                }
                Op::MatMul(a, b) => {
                    if self.needs(a) {
                        let db = g.matmul(&self.value(b).transpose())?;
                        self.accumulate(&mut grads, a, db);
                    }
                    if self.needs(b) {
                        let da = self.value(a).transpose().matmul(&g)?;
                        self.accumulate(&mut grads, b, da);
                    }
                }
                Op::Add(a, b) => {
                    if self.needs(a) {
                        self.accumulate(&mut grads, a, g.clone());
                    }
                    if self.needs(b) {
                        self.accumulate(&mut grads, b, g);
                    }
                }
                Op::Sub(a, b) => {
                    if self.needs(a) {
                        self.accumulate(&mut grads, a, g.clone());
                    }
                    if self.needs(b) {
                        self.accumulate(&mut grads, b, g.scale(-1.0));
                    }
                }
                Op::Hadamard(a, b) => {
                    if self.needs(a) {
                        let d = g.hadamard(self.value(b))?;
                        self.accumulate(&mut grads, a, d);
                    }
                    if self.needs(b) {
                        let d = g.hadamard(self.value(a))?;
                        self.accumulate(&mut grads, b, d);
                    }
                }
                Op::Scale(a, c) => {
                    self.accumulate(&mut grads, a, g.scale(c));
                }
                Op::Relu(a) => {
                    let mask = self.value(a).map(|x| if x > 0.0 { 1.0 } else { 0.0 });
                    self.accumulate(&mut grads, a, g.hadamard(&mask)?);
                }
                Op::Transpose(a) => {
                    self.accumulate(&mut grads, a, g.transpose());
                }
                Op::RowSums(a) => {
                    let src = self.value(a);
                    let d = Matrix::from_fn(src.rows(), src.cols(), |i, _| g.get(i, 0));
                    self.accumulate(&mut grads, a, d);
                }
                Op::PowElem(a, c) => {
                    let src = self.value(a);
                    let d = Matrix::from_fn(src.rows(), src.cols(), |i, j| {
                        c * libm::pow(src.get(i, j), c - 1.0) * g.get(i, j)
                    });
                    self.accumulate(&mut grads, a, d);
                }
                Op::ScaleRows(a, dvar) => {
                    let (am, dm) = (self.value(a), self.value(dvar));
                    if self.needs(a) {
                        let da = Matrix::from_fn(am.rows(), am.cols(), |i, j| {
                            g.get(i, j) * dm.get(i, 0)
                        });
                        self.accumulate(&mut grads, a, da);
                    }
                    if self.needs(dvar) {
                        let dd = Matrix::from_fn(dm.rows(), 1, |i, _| {
                            (0..am.cols()).map(|j| g.get(i, j) * am.get(i, j)).sum()
                        });
                        self.accumulate(&mut grads, dvar, dd);
                    }
                }
                Op::ScaleCols(a, dvar) => {
                    let (am, dm) = (self.value(a), self.value(dvar));
                    if self.needs(a) {
                        let da = Matrix::from_fn(am.rows(), am.cols(), |i, j| {
                            g.get(i, j) * dm.get(j, 0)
                        });
                        self.accumulate(&mut grads, a, da);
                    }
                    if self.needs(dvar) {
                        let dd = Matrix::from_fn(dm.rows(), 1, |j, _| {
                            (0..am.rows()).map(|i| g.get(i, j) * am.get(i, j)).sum()
                        });
                        self.accumulate(&mut grads, dvar, dd);
                    }
                }
                Op::MeanRows(a) => {
                    let src = self.value(a);
                    let inv = 1.0 / src.rows() as f64;
                    let d = Matrix::from_fn(src.rows(), src.cols(), |_, j| g.get(0, j) * inv);
                    self.accumulate(&mut grads, a, d);
                }
                Op::Sum(a) => {
                    let src = self.value(a);
                    let d = Matrix::from_fn(src.rows(), src.cols(), |_, _| g.get(0, 0));
                    self.accumulate(&mut grads, a, d);
                }
                Op::StackRows(rows) => {
                    for (k, &r) in rows.iter().enumerate() {
                        if self.needs(r) {
                            let cols = self.value(r).cols();
                            let d = Matrix::from_fn(1, cols, |_, j| g.get(k, j));
                            self.accumulate(&mut grads, r, d);
                        }
                    }
                }
                Op::SoftmaxCrossEntropy(logits, labels) => {
                    let probs = softmax_rows(self.value(logits));
                    let batch = labels.len() as f64;
                    let upstream = g.get(0, 0);
                    let d = Matrix::from_fn(probs.rows(), probs.cols(), |i, j| {
                        let target = if labels[i] == j { 1.0 } else { 0.0 };
                        (probs.get(i, j) - target) / batch * upstream
                    });
                    self.accumulate(&mut grads, logits, d);
                }
            }
        }

        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Matrix>], v: Var, delta: Matrix) {
        match &mut grads[v.0] {
            Some(existing) => {
                *existing = existing.add(&delta).expect("adjoint shape invariant");
            }
            slot @ None => *slot = Some(delta),
        }
    }
}
