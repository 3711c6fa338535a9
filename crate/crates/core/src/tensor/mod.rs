//! Dense-tensor engine with reverse-mode automatic differentiation.
//!
//! Values live on a [`Tape`]; tensors are lightweight index handles into
//! it. Every forward operation records the inputs it needs for its
//! backward rule, and [`Tape::backward`] replays the records in exact
//! reverse order. One tape serves one forward/backward pass; parameters
//! live outside tapes as plain arrays and are re-bound each pass.
//!
//! The engine deliberately supports no broadcasting beyond row-vector bias
//! addition, and accumulates `scatter_add` contributions in ascending
//! input order, so results are bit-reproducible.

mod gradcheck;
mod ops;

pub use gradcheck::{grad_check, GradCheckReport};

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::real::Real;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TensorError {
    #[error("{op}: shape mismatch ({detail})")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("{op}: index {index} out of range (bound {bound})")]
    IndexOutOfRange {
        op: &'static str,
        index: usize,
        bound: usize,
    },
    #[error("backward requires a scalar loss")]
    NonScalarLoss,
}

/// Handle to a value on a tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Tensor {
    pub(crate) id: usize,
}

impl Tensor {
    pub fn id(self) -> usize {
        self.id
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Op<R: Real> {
    Leaf { requires_grad: bool },
    Add { a: usize, b: usize },
    AddRow { a: usize, bias: usize },
    Sub { a: usize, b: usize },
    Mul { a: usize, b: usize },
    Matmul { a: usize, b: usize },
    Transpose { a: usize },
    Scale { a: usize, c: R },
    Reshape { a: usize },
    Concat { parts: Vec<usize>, axis: usize },
    SliceCols { a: usize, lo: usize, hi: usize },
    GatherRows { a: usize, idx: Vec<usize> },
    ScatterAddRows { a: usize, groups: Vec<usize> },
    SoftmaxRows { a: usize },
    LogSumExpRows { a: usize },
    Tanh { a: usize },
    Relu { a: usize },
    Sigmoid { a: usize },
    Ln { a: usize },
    Sqrt { a: usize },
    Softplus { a: usize },
    Clamp { a: usize, lo: R, hi: R },
    LayerNorm { a: usize, gamma: usize, beta: usize, eps: R },
    SumAll { a: usize },
}

#[derive(Debug, Clone)]
pub(crate) struct Node<R: Real> {
    pub(crate) shape: Vec<usize>,
    pub(crate) value: Vec<R>,
    pub(crate) op: Op<R>,
}

/// Wengert list: forward execution order is the topological order, and the
/// backward pass visits records in exact reverse.
pub struct Tape<R: Real> {
    pub(crate) nodes: Vec<Node<R>>,
    pub(crate) grads: Vec<Option<Vec<R>>>,
}

impl<R: Real> Default for Tape<R> {
    fn default() -> Self {
        Self::new()
    }
}

impl<R: Real> Tape<R> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            grads: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn shape(&self, t: Tensor) -> &[usize] {
        &self.nodes[t.id].shape
    }

    pub fn value(&self, t: Tensor) -> &[R] {
        &self.nodes[t.id].value
    }

    /// Gradient buffer of `t`, populated by the latest [`Tape::backward`].
    pub fn grad(&self, t: Tensor) -> Option<&[R]> {
        self.grads.get(t.id).and_then(|g| g.as_deref())
    }

    pub(crate) fn push(&mut self, shape: Vec<usize>, value: Vec<R>, op: Op<R>) -> Tensor {
        debug_assert_eq!(shape.iter().product::<usize>(), value.len());
        let id = self.nodes.len();
        self.nodes.push(Node { shape, value, op });
        Tensor { id }
    }

    /// Differentiable input.
    pub fn leaf(&mut self, shape: &[usize], data: Vec<R>) -> Tensor {
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "leaf data length must match shape"
        );
        self.push(
            shape.to_vec(),
            data,
            Op::Leaf {
                requires_grad: true,
            },
        )
    }

    /// Non-differentiable input.
    pub fn constant(&mut self, shape: &[usize], data: Vec<R>) -> Tensor {
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "constant data length must match shape"
        );
        self.push(
            shape.to_vec(),
            data,
            Op::Leaf {
                requires_grad: false,
            },
        )
    }

    pub fn scalar_constant(&mut self, v: R) -> Tensor {
        self.constant(&[], vec![v])
    }

    pub fn zeros(&mut self, shape: &[usize]) -> Tensor {
        let n = shape.iter().product();
        self.constant(shape, vec![R::ZERO; n])
    }

    /// Reverse pass from a scalar loss. Every node at or before the loss
    /// gets a gradient buffer; leaves not on the loss path keep zeros.
    pub fn backward(&mut self, loss: Tensor) -> Result<(), TensorError> {
        if self.nodes[loss.id].value.len() != 1 {
            return Err(TensorError::NonScalarLoss);
        }
        let n = loss.id + 1;
        let mut grads: Vec<Vec<R>> = (0..n)
            .map(|i| vec![R::ZERO; self.nodes[i].value.len()])
            .collect();
        grads[loss.id][0] = R::ONE;

        for id in (0..n).rev() {
            // split off this node's gradient so inputs can be accumulated
            let g = core::mem::take(&mut grads[id]);
            self.accumulate(id, &g, &mut grads);
            grads[id] = g;
        }

        self.grads = grads
            .into_iter()
            .enumerate()
            .map(|(i, g)| match self.nodes[i].op {
                Op::Leaf {
                    requires_grad: false,
                } => None,
                _ => Some(g),
            })
            .collect();
        self.grads.resize(self.nodes.len(), None);
        Ok(())
    }

    fn accumulate(&self, id: usize, g: &[R], grads: &mut [Vec<R>]) {
        match &self.nodes[id].op {
            Op::Leaf { .. } => {}
            Op::Add { a, b } => {
                for (ga, &gi) in grads[*a].iter_mut().zip(g) {
                    *ga += gi;
                }
                for (gb, &gi) in grads[*b].iter_mut().zip(g) {
                    *gb += gi;
                }
            }
            Op::AddRow { a, bias } => {
                for (ga, &gi) in grads[*a].iter_mut().zip(g) {
                    *ga += gi;
                }
                let d = self.nodes[*bias].value.len();
                let gb = &mut grads[*bias];
                for (i, &gi) in g.iter().enumerate() {
                    gb[i % d] += gi;
                }
            }
            Op::Sub { a, b } => {
                for (ga, &gi) in grads[*a].iter_mut().zip(g) {
                    *ga += gi;
                }
                for (gb, &gi) in grads[*b].iter_mut().zip(g) {
                    *gb -= gi;
                }
            }
            Op::Mul { a, b } => {
                let av = &self.nodes[*a].value;
                let bv = &self.nodes[*b].value;
                for i in 0..g.len() {
                    grads[*a][i] += g[i] * bv[i];
                }
                for i in 0..g.len() {
                    grads[*b][i] += g[i] * av[i];
                }
            }
            Op::Matmul { a, b } => {
                // C = A(m,k) B(k,n): dA += g Bᵀ, dB += Aᵀ g
                let (m, k) = (self.nodes[*a].shape[0], self.nodes[*a].shape[1]);
                let n = self.nodes[*b].shape[1];
                let av = &self.nodes[*a].value;
                let bv = &self.nodes[*b].value;
                {
                    let ga = &mut grads[*a];
                    for i in 0..m {
                        for j in 0..n {
                            let gij = g[i * n + j];
                            if gij != R::ZERO {
                                for p in 0..k {
                                    ga[i * k + p] += gij * bv[p * n + j];
                                }
                            }
                        }
                    }
                }
                {
                    let gb = &mut grads[*b];
                    for i in 0..m {
                        for p in 0..k {
                            let aip = av[i * k + p];
                            if aip != R::ZERO {
                                for j in 0..n {
                                    gb[p * n + j] += aip * g[i * n + j];
                                }
                            }
                        }
                    }
                }
            }
            Op::Transpose { a } => {
                let (rows, cols) = (self.nodes[*a].shape[0], self.nodes[*a].shape[1]);
                let ga = &mut grads[*a];
                for i in 0..rows {
                    for j in 0..cols {
                        ga[i * cols + j] += g[j * rows + i];
                    }
                }
            }
            Op::Scale { a, c } => {
                for (ga, &gi) in grads[*a].iter_mut().zip(g) {
                    *ga += *c * gi;
                }
            }
            Op::Reshape { a } => {
                for (ga, &gi) in grads[*a].iter_mut().zip(g) {
                    *ga += gi;
                }
            }
            Op::Concat { parts, axis } => {
                if *axis == 0 {
                    let mut offset = 0;
                    for &p in parts {
                        let len = self.nodes[p].value.len();
                        for (gp, &gi) in grads[p].iter_mut().zip(&g[offset..offset + len]) {
                            *gp += gi;
                        }
                        offset += len;
                    }
                } else {
                    let rows = self.nodes[id].shape[0];
                    let total_cols = self.nodes[id].shape[1];
                    let mut col_off = 0;
                    for &p in parts {
                        let cols = self.nodes[p].shape[1];
                        let gp = &mut grads[p];
                        for i in 0..rows {
                            for j in 0..cols {
                                gp[i * cols + j] += g[i * total_cols + col_off + j];
                            }
                        }
                        col_off += cols;
                    }
                }
            }
            Op::SliceCols { a, lo, hi } => {
                let cols = self.nodes[*a].shape[1];
                let rows = self.nodes[*a].shape[0];
                let width = hi - lo;
                let ga = &mut grads[*a];
                for i in 0..rows {
                    for j in 0..width {
                        ga[i * cols + lo + j] += g[i * width + j];
                    }
                }
            }
            Op::GatherRows { a, idx } => {
                let cols = self.nodes[*a].shape[1];
                let ga = &mut grads[*a];
                for (i, &src) in idx.iter().enumerate() {
                    for j in 0..cols {
                        ga[src * cols + j] += g[i * cols + j];
                    }
                }
            }
            Op::ScatterAddRows { a, groups } => {
                // adjoint of scatter-add is a gather of the upstream grad
                let cols = self.nodes[*a].shape[1];
                let ga = &mut grads[*a];
                for (i, &dst) in groups.iter().enumerate() {
                    for j in 0..cols {
                        ga[i * cols + j] += g[dst * cols + j];
                    }
                }
            }
            Op::SoftmaxRows { a } => {
                let (rows, cols) = (self.nodes[id].shape[0], self.nodes[id].shape[1]);
                let y = &self.nodes[id].value;
                let ga = &mut grads[*a];
                for i in 0..rows {
                    let row = i * cols;
                    let mut dot = R::ZERO;
                    for j in 0..cols {
                        dot += g[row + j] * y[row + j];
                    }
                    for j in 0..cols {
                        ga[row + j] += y[row + j] * (g[row + j] - dot);
                    }
                }
            }
            Op::LogSumExpRows { a } => {
                // d/dx logsumexp = softmax(x)
                let (rows, cols) = (self.nodes[*a].shape[0], self.nodes[*a].shape[1]);
                let x = &self.nodes[*a].value;
                let lse = &self.nodes[id].value;
                let ga = &mut grads[*a];
                for i in 0..rows {
                    for j in 0..cols {
                        let p = (x[i * cols + j] - lse[i]).exp();
                        ga[i * cols + j] += g[i] * p;
                    }
                }
            }
            Op::Tanh { a } => {
                let y = &self.nodes[id].value;
                let ga = &mut grads[*a];
                for i in 0..g.len() {
                    ga[i] += g[i] * (R::ONE - y[i] * y[i]);
                }
            }
            Op::Relu { a } => {
                let x = &self.nodes[*a].value;
                let ga = &mut grads[*a];
                for i in 0..g.len() {
                    if x[i] > R::ZERO {
                        ga[i] += g[i];
                    }
                }
            }
            Op::Sigmoid { a } => {
                let y = &self.nodes[id].value;
                let ga = &mut grads[*a];
                for i in 0..g.len() {
                    ga[i] += g[i] * y[i] * (R::ONE - y[i]);
                }
            }
            Op::Ln { a } => {
                let x = &self.nodes[*a].value;
                let ga = &mut grads[*a];
                for i in 0..g.len() {
                    ga[i] += g[i] / x[i];
                }
            }
            Op::Sqrt { a } => {
                // subgradient 0 at the origin keeps norm terms finite
                let y = &self.nodes[id].value;
                let ga = &mut grads[*a];
                let two = R::from_f64(2.0);
                for i in 0..g.len() {
                    if y[i] != R::ZERO {
                        ga[i] += g[i] / (two * y[i]);
                    }
                }
            }
            Op::Softplus { a } => {
                let x = &self.nodes[*a].value;
                let ga = &mut grads[*a];
                for i in 0..g.len() {
                    let s = R::ONE / (R::ONE + (-x[i]).exp());
                    ga[i] += g[i] * s;
                }
            }
            Op::Clamp { a, lo, hi } => {
                let x = &self.nodes[*a].value;
                let ga = &mut grads[*a];
                for i in 0..g.len() {
                    if x[i] >= *lo && x[i] <= *hi {
                        ga[i] += g[i];
                    }
                }
            }
            Op::LayerNorm { a, gamma, beta, eps } => {
                let (rows, cols) = (self.nodes[*a].shape[0], self.nodes[*a].shape[1]);
                let x = &self.nodes[*a].value;
                let gv = &self.nodes[*gamma].value;
                let nf = R::from_f64(cols as f64);
                for i in 0..rows {
                    let row = i * cols;
                    let mut mean = R::ZERO;
                    for j in 0..cols {
                        mean += x[row + j];
                    }
                    mean /= nf;
                    let mut var = R::ZERO;
                    for j in 0..cols {
                        let d = x[row + j] - mean;
                        var += d * d;
                    }
                    var /= nf;
                    let inv_std = R::ONE / (var + *eps).sqrt();

                    let mut sum_dxhat = R::ZERO;
                    let mut sum_dxhat_xhat = R::ZERO;
                    for j in 0..cols {
                        let xhat = (x[row + j] - mean) * inv_std;
                        let dxhat = g[row + j] * gv[j];
                        sum_dxhat += dxhat;
                        sum_dxhat_xhat += dxhat * xhat;
                        grads[*gamma][j] += g[row + j] * xhat;
                        grads[*beta][j] += g[row + j];
                    }
                    let ga = &mut grads[*a];
                    for j in 0..cols {
                        let xhat = (x[row + j] - mean) * inv_std;
                        let dxhat = g[row + j] * gv[j];
                        ga[row + j] +=
                            inv_std * (dxhat - sum_dxhat / nf - xhat * sum_dxhat_xhat / nf);
                    }
                }
            }
            Op::SumAll { a } => {
                let gi = g[0];
                for ga in grads[*a].iter_mut() {
                    *ga += gi;
                }
            }
        }
    }
}

pub(crate) fn shape_err(op: &'static str, detail: String) -> TensorError {
    TensorError::ShapeMismatch { op, detail }
}

pub(crate) fn fmt_shape(s: &[usize]) -> String {
    format!("{s:?}")
}
