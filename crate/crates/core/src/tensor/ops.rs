//! Forward operations. Each op validates shapes, computes its value, and
//! records a backward rule on the tape.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{fmt_shape, shape_err, Op, Tape, Tensor, TensorError};
use crate::real::Real;

/// Fixed layer-norm epsilon so outputs are reproducible across builds.
pub const LAYER_NORM_EPS: f64 = 1e-5;

impl<R: Real> Tape<R> {
    fn dims2(&self, t: Tensor, op: &'static str) -> Result<(usize, usize), TensorError> {
        let s = self.shape(t);
        if s.len() != 2 {
            return Err(shape_err(op, format!("expected a matrix, got {}", fmt_shape(s))));
        }
        Ok((s[0], s[1]))
    }

    /// Elementwise addition, or row-vector bias addition when `b` is a
    /// vector matching `a`'s column count (the only supported broadcast).
    pub fn add(&mut self, a: Tensor, b: Tensor) -> Result<Tensor, TensorError> {
        let sa = self.shape(a).to_vec();
        let sb = self.shape(b).to_vec();
        if sa == sb {
            let value = self
                .value(a)
                .iter()
                .zip(self.value(b))
                .map(|(&x, &y)| x + y)
                .collect();
            return Ok(self.push(sa, value, Op::Add { a: a.id, b: b.id }));
        }
        if sa.len() == 2 && sb.len() == 1 && sb[0] == sa[1] {
            let d = sa[1];
            let bias = self.value(b);
            let value = self
                .value(a)
                .iter()
                .enumerate()
                .map(|(i, &x)| x + bias[i % d])
                .collect();
            return Ok(self.push(sa, value, Op::AddRow { a: a.id, bias: b.id }));
        }
        Err(shape_err(
            "add",
            format!("{} vs {}", fmt_shape(&sa), fmt_shape(&sb)),
        ))
    }

    pub fn sub(&mut self, a: Tensor, b: Tensor) -> Result<Tensor, TensorError> {
        let sa = self.shape(a).to_vec();
        if sa != self.shape(b) {
            return Err(shape_err(
                "sub",
                format!("{} vs {}", fmt_shape(&sa), fmt_shape(self.shape(b))),
            ));
        }
        let value = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(&x, &y)| x - y)
            .collect();
        Ok(self.push(sa, value, Op::Sub { a: a.id, b: b.id }))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: Tensor, b: Tensor) -> Result<Tensor, TensorError> {
        let sa = self.shape(a).to_vec();
        if sa != self.shape(b) {
            return Err(shape_err(
                "mul",
                format!("{} vs {}", fmt_shape(&sa), fmt_shape(self.shape(b))),
            ));
        }
        let value = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(&x, &y)| x * y)
            .collect();
        Ok(self.push(sa, value, Op::Mul { a: a.id, b: b.id }))
    }

    pub fn matmul(&mut self, a: Tensor, b: Tensor) -> Result<Tensor, TensorError> {
        let (m, k) = self.dims2(a, "matmul")?;
        let (k2, n) = self.dims2(b, "matmul")?;
        if k != k2 {
            return Err(shape_err(
                "matmul",
                format!(
                    "{} x {}",
                    fmt_shape(self.shape(a)),
                    fmt_shape(self.shape(b))
                ),
            ));
        }
        let av = self.value(a);
        let bv = self.value(b);
        let mut out = vec![R::ZERO; m * n];
        for i in 0..m {
            for p in 0..k {
                let aip = av[i * k + p];
                if aip != R::ZERO {
                    let brow = &bv[p * n..(p + 1) * n];
                    let orow = &mut out[i * n..(i + 1) * n];
                    for j in 0..n {
                        orow[j] += aip * brow[j];
                    }
                }
            }
        }
        Ok(self.push(vec![m, n], out, Op::Matmul { a: a.id, b: b.id }))
    }

    pub fn transpose(&mut self, a: Tensor) -> Result<Tensor, TensorError> {
        let (m, n) = self.dims2(a, "transpose")?;
        let av = self.value(a);
        let mut out = vec![R::ZERO; m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = av[i * n + j];
            }
        }
        Ok(self.push(vec![n, m], out, Op::Transpose { a: a.id }))
    }

    pub fn scale(&mut self, a: Tensor, c: R) -> Tensor {
        let value = self.value(a).iter().map(|&x| c * x).collect();
        let shape = self.shape(a).to_vec();
        self.push(shape, value, Op::Scale { a: a.id, c })
    }

    pub fn reshape(&mut self, a: Tensor, shape: &[usize]) -> Result<Tensor, TensorError> {
        let len: usize = shape.iter().product();
        if len != self.value(a).len() {
            return Err(shape_err(
                "reshape",
                format!("{} -> {}", fmt_shape(self.shape(a)), fmt_shape(shape)),
            ));
        }
        let value = self.value(a).to_vec();
        Ok(self.push(shape.to_vec(), value, Op::Reshape { a: a.id }))
    }

    /// Concatenate matrices along `axis` (0 = stack rows, 1 = widen rows).
    pub fn concat(&mut self, axis: usize, parts: &[Tensor]) -> Result<Tensor, TensorError> {
        if parts.is_empty() || axis > 1 {
            return Err(shape_err("concat", format!("axis {axis}, {} parts", parts.len())));
        }
        for &p in parts {
            self.dims2(p, "concat")?;
        }
        if axis == 0 {
            let cols = self.shape(parts[0])[1];
            let mut rows = 0;
            let mut value = Vec::new();
            for &p in parts {
                let (r, c) = self.dims2(p, "concat")?;
                if c != cols {
                    return Err(shape_err(
                        "concat",
                        format!("column counts differ: {cols} vs {c}"),
                    ));
                }
                rows += r;
                value.extend_from_slice(self.value(p));
            }
            Ok(self.push(
                vec![rows, cols],
                value,
                Op::Concat {
                    parts: parts.iter().map(|t| t.id).collect(),
                    axis: 0,
                },
            ))
        } else {
            let rows = self.shape(parts[0])[0];
            let mut cols = 0;
            for &p in parts {
                let (r, c) = self.dims2(p, "concat")?;
                if r != rows {
                    return Err(shape_err(
                        "concat",
                        format!("row counts differ: {rows} vs {r}"),
                    ));
                }
                cols += c;
            }
            let mut value = vec![R::ZERO; rows * cols];
            let mut col_off = 0;
            for &p in parts {
                let c = self.shape(p)[1];
                let pv = self.value(p);
                for i in 0..rows {
                    value[i * cols + col_off..i * cols + col_off + c]
                        .copy_from_slice(&pv[i * c..(i + 1) * c]);
                }
                col_off += c;
            }
            Ok(self.push(
                vec![rows, cols],
                value,
                Op::Concat {
                    parts: parts.iter().map(|t| t.id).collect(),
                    axis: 1,
                },
            ))
        }
    }

    pub fn slice_cols(&mut self, a: Tensor, lo: usize, hi: usize) -> Result<Tensor, TensorError> {
        let (rows, cols) = self.dims2(a, "slice_cols")?;
        if lo >= hi || hi > cols {
            return Err(shape_err(
                "slice_cols",
                format!("range {lo}..{hi} of {cols} columns"),
            ));
        }
        let av = self.value(a);
        let width = hi - lo;
        let mut value = Vec::with_capacity(rows * width);
        for i in 0..rows {
            value.extend_from_slice(&av[i * cols + lo..i * cols + hi]);
        }
        Ok(self.push(
            vec![rows, width],
            value,
            Op::SliceCols { a: a.id, lo, hi },
        ))
    }

    /// Row selection by index; repeated indices are allowed (gradients
    /// accumulate into the shared source row).
    pub fn gather_rows(&mut self, a: Tensor, idx: &[usize]) -> Result<Tensor, TensorError> {
        let (rows, cols) = self.dims2(a, "gather_rows")?;
        for &i in idx {
            if i >= rows {
                return Err(TensorError::IndexOutOfRange {
                    op: "gather_rows",
                    index: i,
                    bound: rows,
                });
            }
        }
        let av = self.value(a);
        let mut value = Vec::with_capacity(idx.len() * cols);
        for &i in idx {
            value.extend_from_slice(&av[i * cols..(i + 1) * cols]);
        }
        Ok(self.push(
            vec![idx.len(), cols],
            value,
            Op::GatherRows {
                a: a.id,
                idx: idx.to_vec(),
            },
        ))
    }

    /// Keep the rows whose mask entry is true.
    pub fn select_rows(&mut self, a: Tensor, mask: &[bool]) -> Result<Tensor, TensorError> {
        let (rows, _) = self.dims2(a, "select_rows")?;
        if mask.len() != rows {
            return Err(shape_err(
                "select_rows",
                format!("mask length {} for {} rows", mask.len(), rows),
            ));
        }
        let idx: Vec<usize> = mask
            .iter()
            .enumerate()
            .filter_map(|(i, &keep)| keep.then_some(i))
            .collect();
        self.gather_rows(a, &idx)
    }

    /// Index-grouped summation: row i of the input is added into output row
    /// `groups[i]`. Accumulation order is ascending input index.
    pub fn scatter_add_rows(
        &mut self,
        a: Tensor,
        groups: &[usize],
        n_rows: usize,
    ) -> Result<Tensor, TensorError> {
        let (rows, cols) = self.dims2(a, "scatter_add_rows")?;
        if groups.len() != rows {
            return Err(shape_err(
                "scatter_add_rows",
                format!("{} groups for {} rows", groups.len(), rows),
            ));
        }
        for &gidx in groups {
            if gidx >= n_rows {
                return Err(TensorError::IndexOutOfRange {
                    op: "scatter_add_rows",
                    index: gidx,
                    bound: n_rows,
                });
            }
        }
        let av = self.value(a);
        let mut value = vec![R::ZERO; n_rows * cols];
        for (i, &dst) in groups.iter().enumerate() {
            for j in 0..cols {
                value[dst * cols + j] += av[i * cols + j];
            }
        }
        Ok(self.push(
            vec![n_rows, cols],
            value,
            Op::ScatterAddRows {
                a: a.id,
                groups: groups.to_vec(),
            },
        ))
    }

    /// Row-wise softmax. `-inf` entries get weight exactly zero.
    pub fn softmax_rows(&mut self, a: Tensor) -> Result<Tensor, TensorError> {
        let (rows, cols) = self.dims2(a, "softmax_rows")?;
        let av = self.value(a);
        let mut value = vec![R::ZERO; rows * cols];
        for i in 0..rows {
            let row = &av[i * cols..(i + 1) * cols];
            let mut max = row[0];
            for &x in row.iter() {
                if x > max {
                    max = x;
                }
            }
            let mut sum = R::ZERO;
            for j in 0..cols {
                let e = (row[j] - max).exp();
                value[i * cols + j] = e;
                sum += e;
            }
            for j in 0..cols {
                value[i * cols + j] /= sum;
            }
        }
        Ok(self.push(vec![rows, cols], value, Op::SoftmaxRows { a: a.id }))
    }

    /// Row-wise log-sum-exp, the stable building block for softmax
    /// cross-entropy. Output shape is `[rows]`.
    pub fn logsumexp_rows(&mut self, a: Tensor) -> Result<Tensor, TensorError> {
        let (rows, cols) = self.dims2(a, "logsumexp_rows")?;
        let av = self.value(a);
        let mut value = vec![R::ZERO; rows];
        for i in 0..rows {
            let row = &av[i * cols..(i + 1) * cols];
            let mut max = row[0];
            for &x in row.iter() {
                if x > max {
                    max = x;
                }
            }
            let mut sum = R::ZERO;
            for &x in row.iter() {
                sum += (x - max).exp();
            }
            value[i] = max + sum.ln();
        }
        Ok(self.push(vec![rows], value, Op::LogSumExpRows { a: a.id }))
    }

    pub fn tanh(&mut self, a: Tensor) -> Tensor {
        let value = self.value(a).iter().map(|&x| x.tanh()).collect();
        let shape = self.shape(a).to_vec();
        self.push(shape, value, Op::Tanh { a: a.id })
    }

    pub fn relu(&mut self, a: Tensor) -> Tensor {
        let value = self
            .value(a)
            .iter()
            .map(|&x| if x > R::ZERO { x } else { R::ZERO })
            .collect();
        let shape = self.shape(a).to_vec();
        self.push(shape, value, Op::Relu { a: a.id })
    }

    pub fn sigmoid(&mut self, a: Tensor) -> Tensor {
        let value = self
            .value(a)
            .iter()
            .map(|&x| R::ONE / (R::ONE + (-x).exp()))
            .collect();
        let shape = self.shape(a).to_vec();
        self.push(shape, value, Op::Sigmoid { a: a.id })
    }

    pub fn ln(&mut self, a: Tensor) -> Tensor {
        let value = self.value(a).iter().map(|&x| x.ln()).collect();
        let shape = self.shape(a).to_vec();
        self.push(shape, value, Op::Ln { a: a.id })
    }

    /// Elementwise square root; the backward rule uses subgradient 0 at the
    /// origin so L2-norm terms stay finite when the norm is exactly zero.
    pub fn sqrt(&mut self, a: Tensor) -> Tensor {
        let value = self.value(a).iter().map(|&x| x.sqrt()).collect();
        let shape = self.shape(a).to_vec();
        self.push(shape, value, Op::Sqrt { a: a.id })
    }

    /// Numerically stable `ln(1 + exp(x))`.
    pub fn softplus(&mut self, a: Tensor) -> Tensor {
        let value = self
            .value(a)
            .iter()
            .map(|&x| {
                let pos = if x > R::ZERO { x } else { R::ZERO };
                pos + (-x.abs()).exp().ln_1p()
            })
            .collect();
        let shape = self.shape(a).to_vec();
        self.push(shape, value, Op::Softplus { a: a.id })
    }

    pub fn clamp(&mut self, a: Tensor, lo: R, hi: R) -> Tensor {
        let value = self
            .value(a)
            .iter()
            .map(|&x| x.max(lo).min(hi))
            .collect();
        let shape = self.shape(a).to_vec();
        self.push(shape, value, Op::Clamp { a: a.id, lo, hi })
    }

    /// Per-row layer normalization with affine parameters.
    pub fn layer_norm(
        &mut self,
        a: Tensor,
        gamma: Tensor,
        beta: Tensor,
    ) -> Result<Tensor, TensorError> {
        let (rows, cols) = self.dims2(a, "layer_norm")?;
        if self.shape(gamma) != [cols] || self.shape(beta) != [cols] {
            return Err(shape_err(
                "layer_norm",
                format!(
                    "input {} with gamma {} beta {}",
                    fmt_shape(self.shape(a)),
                    fmt_shape(self.shape(gamma)),
                    fmt_shape(self.shape(beta))
                ),
            ));
        }
        let eps = R::from_f64(LAYER_NORM_EPS);
        let av = self.value(a);
        let gv = self.value(gamma);
        let bv = self.value(beta);
        let nf = R::from_f64(cols as f64);
        let mut value = vec![R::ZERO; rows * cols];
        for i in 0..rows {
            let row = &av[i * cols..(i + 1) * cols];
            let mut mean = R::ZERO;
            for &x in row.iter() {
                mean += x;
            }
            mean /= nf;
            let mut var = R::ZERO;
            for &x in row.iter() {
                let d = x - mean;
                var += d * d;
            }
            var /= nf;
            let inv_std = R::ONE / (var + eps).sqrt();
            for j in 0..cols {
                value[i * cols + j] = (row[j] - mean) * inv_std * gv[j] + bv[j];
            }
        }
        Ok(self.push(
            vec![rows, cols],
            value,
            Op::LayerNorm {
                a: a.id,
                gamma: gamma.id,
                beta: beta.id,
                eps,
            },
        ))
    }

    /// Sum of all entries; output is a rank-0 scalar.
    pub fn sum_all(&mut self, a: Tensor) -> Tensor {
        let mut sum = R::ZERO;
        for &x in self.value(a) {
            sum += x;
        }
        self.push(Vec::new(), vec![sum], Op::SumAll { a: a.id })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tape() -> Tape<f64> {
        Tape::new()
    }

    #[test]
    fn softmax_symmetry() {
        let mut t = tape();
        let x = t.constant(&[1, 2], vec![0.0, 0.0]);
        let y = t.softmax_rows(x).unwrap();
        assert_eq!(t.value(y), &[0.5, 0.5]);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut t = tape();
        let x = t.constant(&[2, 3], vec![1.0, -2.0, 0.5, 10.0, 10.0, -30.0]);
        let y = t.softmax_rows(x).unwrap();
        for i in 0..2 {
            let s: f64 = t.value(y)[i * 3..(i + 1) * 3].iter().sum();
            assert!((s - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn softmax_neg_inf_masked() {
        let mut t = tape();
        let x = t.constant(&[1, 3], vec![0.3, f64::NEG_INFINITY, 0.3]);
        let y = t.softmax_rows(x).unwrap();
        assert_eq!(t.value(y)[1], 0.0);
        assert!((t.value(y)[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn matmul_identity() {
        let mut t = tape();
        let eye = t.constant(&[2, 2], vec![1.0, 0.0, 0.0, 1.0]);
        let m = t.constant(&[2, 2], vec![3.0, -1.0, 2.5, 7.0]);
        let y = t.matmul(eye, m).unwrap();
        assert_eq!(t.value(y), t.value(m));
    }

    #[test]
    fn matmul_shape_mismatch() {
        let mut t = tape();
        let a = t.constant(&[2, 3], vec![0.0; 6]);
        let b = t.constant(&[2, 3], vec![0.0; 6]);
        match t.matmul(a, b) {
            Err(TensorError::ShapeMismatch { op, .. }) => assert_eq!(op, "matmul"),
            other => panic!("expected shape mismatch, got {other:?}"),
        }
    }

    #[test]
    fn scatter_add_hand_case() {
        let mut t = tape();
        let v = t.constant(&[3, 1], vec![1.0, 2.0, 3.0]);
        let y = t.scatter_add_rows(v, &[0, 0, 1], 2).unwrap();
        assert_eq!(t.value(y), &[3.0, 3.0]);
    }

    #[test]
    fn scatter_index_out_of_range() {
        let mut t = tape();
        let v = t.constant(&[1, 1], vec![1.0]);
        assert!(matches!(
            t.scatter_add_rows(v, &[5], 2),
            Err(TensorError::IndexOutOfRange {
                op: "scatter_add_rows",
                index: 5,
                bound: 2
            })
        ));
    }

    #[test]
    fn backward_of_sum_is_ones() {
        let mut t = tape();
        let x = t.leaf(&[3], vec![5.0, -2.0, 0.1]);
        let s = t.sum_all(x);
        t.backward(s).unwrap();
        assert_eq!(t.grad(x).unwrap(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn backward_of_square() {
        let mut t = tape();
        let x = t.leaf(&[2], vec![1.0, 2.0]);
        let sq = t.mul(x, x).unwrap();
        let s = t.sum_all(sq);
        t.backward(s).unwrap();
        assert_eq!(t.grad(x).unwrap(), &[2.0, 4.0]);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut t = tape();
        let x = t.leaf(&[2], vec![1.0, 2.0]);
        assert!(matches!(t.backward(x), Err(TensorError::NonScalarLoss)));
    }

    #[test]
    fn off_path_leaf_gets_zero_grad() {
        let mut t = tape();
        let x = t.leaf(&[2], vec![1.0, 2.0]);
        let unused = t.leaf(&[2], vec![3.0, 4.0]);
        let s = t.sum_all(x);
        t.backward(s).unwrap();
        assert_eq!(t.grad(unused).unwrap(), &[0.0, 0.0]);
    }

    #[test]
    fn scatter_backward_is_gather() {
        // pick random-ish values; d(scatter)/d(input) routes the upstream
        // grad of each group row back to its members
        let mut t = tape();
        let v = t.leaf(&[3, 2], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let y = t.scatter_add_rows(v, &[1, 0, 1], 2).unwrap();
        let w = t.constant(&[2, 2], vec![10.0, 20.0, 30.0, 40.0]);
        let p = t.mul(y, w).unwrap();
        let s = t.sum_all(p);
        t.backward(s).unwrap();
        assert_eq!(t.grad(v).unwrap(), &[30.0, 40.0, 10.0, 20.0, 30.0, 40.0]);
    }

    #[test]
    fn gather_accumulates_repeated_rows() {
        let mut t = tape();
        let v = t.leaf(&[2, 1], vec![1.0, 2.0]);
        let y = t.gather_rows(v, &[0, 0, 1]).unwrap();
        let s = t.sum_all(y);
        t.backward(s).unwrap();
        assert_eq!(t.grad(v).unwrap(), &[2.0, 1.0]);
    }

    #[test]
    fn layer_norm_normalizes_rows() {
        let mut t = tape();
        let x = t.constant(&[2, 4], vec![1.0, 2.0, 3.0, 4.0, -5.0, 0.0, 5.0, 10.0]);
        let gamma = t.constant(&[4], vec![1.0; 4]);
        let beta = t.constant(&[4], vec![0.0; 4]);
        let y = t.layer_norm(x, gamma, beta).unwrap();
        for i in 0..2 {
            let row = &t.value(y)[i * 4..(i + 1) * 4];
            let mean: f64 = row.iter().sum::<f64>() / 4.0;
            let var: f64 = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / 4.0;
            assert!(mean.abs() < 1e-6, "row mean {mean}");
            assert!((var - 1.0).abs() < 1e-4, "row var {var}");
        }
    }

    #[test]
    fn concat_and_slice_roundtrip() {
        let mut t = tape();
        let a = t.constant(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]);
        let b = t.constant(&[2, 1], vec![5.0, 6.0]);
        let c = t.concat(1, &[a, b]).unwrap();
        assert_eq!(t.shape(c), &[2, 3]);
        assert_eq!(t.value(c), &[1.0, 2.0, 5.0, 3.0, 4.0, 6.0]);
        let back = t.slice_cols(c, 0, 2).unwrap();
        assert_eq!(t.value(back), t.value(a));

        let r = t.concat(0, &[a, a]).unwrap();
        assert_eq!(t.shape(r), &[4, 2]);
    }

    #[test]
    fn select_rows_by_mask() {
        let mut t = tape();
        let a = t.constant(&[3, 2], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let y = t.select_rows(a, &[true, false, true]).unwrap();
        assert_eq!(t.shape(y), &[2, 2]);
        assert_eq!(t.value(y), &[1.0, 2.0, 5.0, 6.0]);
    }

    #[test]
    fn softplus_matches_naive_in_safe_range() {
        let mut t = tape();
        let x = t.constant(&[4], vec![-3.0, -0.5, 0.5, 3.0]);
        let y = t.softplus(x);
        for (i, &xi) in [-3.0f64, -0.5, 0.5, 3.0].iter().enumerate() {
            assert!((t.value(y)[i] - (1.0 + xi.exp()).ln()).abs() < 1e-12);
        }
        // extreme inputs stay finite
        let x = t.constant(&[2], vec![-1000.0, 1000.0]);
        let y = t.softplus(x);
        assert_eq!(t.value(y)[0], 0.0);
        assert_eq!(t.value(y)[1], 1000.0);
    }

    #[test]
    fn logsumexp_stable() {
        let mut t = tape();
        let x = t.constant(&[1, 2], vec![1000.0, 1000.0]);
        let y = t.logsumexp_rows(x).unwrap();
        assert!((t.value(y)[0] - (1000.0 + 2.0f64.ln())).abs() < 1e-9);
    }

    #[test]
    fn sqrt_zero_has_zero_grad() {
        let mut t = tape();
        let x = t.leaf(&[2], vec![0.0, 4.0]);
        let y = t.sqrt(x);
        let s = t.sum_all(y);
        t.backward(s).unwrap();
        assert_eq!(t.grad(x).unwrap(), &[0.0, 0.25]);
    }

    #[test]
    fn add_row_bias_broadcast() {
        let mut t = tape();
        let a = t.leaf(&[2, 3], vec![0.0; 6]);
        let b = t.leaf(&[3], vec![1.0, 2.0, 3.0]);
        let y = t.add(a, b).unwrap();
        assert_eq!(t.value(y), &[1.0, 2.0, 3.0, 1.0, 2.0, 3.0]);
        let s = t.sum_all(y);
        t.backward(s).unwrap();
        assert_eq!(t.grad(b).unwrap(), &[2.0, 2.0, 2.0]);
    }

    #[test]
    fn empty_row_matrices_flow_through() {
        let mut t = tape();
        let a = t.constant(&[0, 3], vec![]);
        let w = t.constant(&[3, 2], vec![0.0; 6]);
        let y = t.matmul(a, w).unwrap();
        assert_eq!(t.shape(y), &[0, 2]);
        let z = t.scatter_add_rows(y, &[], 4).unwrap();
        assert_eq!(t.shape(z), &[4, 2]);
        assert!(t.value(z).iter().all(|&v| v == 0.0));
    }
}
