//! Minimal dense/CSR linear algebra.
//!
//! All reductions run in fixed index order so results are bitwise
//! deterministic. Dense matmul skips exact zeros in the left operand;
//! adding `0.0` is an identity in IEEE-754, so skipping keeps the result
//! bit-identical while making sparse feature matrices cheap.

use serde::{Deserialize, Serialize};

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self { rows: r, cols: c, data: rows.into_iter().flatten().collect() }
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols.max(1)).map(<[f64]>::to_vec).collect()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    /// `self * other`, skipping zero entries of `self`.
    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let a_row = self.row(i);
            let out_row = out.row_mut(i);
            for (k, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let b_row = other.row(k);
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self^T * other`, skipping zero entries of `self`.
    pub fn transpose_matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.rows, other.rows, "transpose_matmul shape mismatch");
        let mut out = Matrix::zeros(self.cols, other.cols);
        for i in 0..self.rows {
            let a_row = self.row(i);
            let b_row = other.row(i);
            for (k, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let out_row = out.row_mut(k);
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self * other^T`.
    pub fn matmul_transpose(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.cols, "matmul_transpose shape mismatch");
        let mut out = Matrix::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a_row = self.row(i);
            for j in 0..other.rows {
                let b_row = other.row(j);
                let mut acc = 0.0;
                for (&a, &b) in a_row.iter().zip(b_row) {
                    acc += a * b;
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    /// Adds `v` to every row.
    pub fn add_row_broadcast(&mut self, v: &[f64]) {
        assert_eq!(self.cols, v.len());
        for i in 0..self.rows {
            for (x, &b) in self.row_mut(i).iter_mut().zip(v) {
                *x += b;
            }
        }
    }

    /// Column sums in fixed order.
    pub fn col_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (o, &x) in out.iter_mut().zip(self.row(i)) {
                *o += x;
            }
        }
        out
    }

    pub fn map_in_place(&mut self, f: impl Fn(f64) -> f64) {
        for x in &mut self.data {
            *x = f(*x);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Sparse square matrix in CSR form with explicit values.
#[derive(Debug, Clone)]
pub struct Csr {
    pub n: usize,
    pub offsets: Vec<usize>,
    pub targets: Vec<usize>,
    pub values: Vec<f64>,
}

impl Csr {
    /// `self * dense`, rows in order, per-row entries in stored order.
    pub fn matmul_dense(&self, dense: &Matrix) -> Matrix {
        assert_eq!(self.n, dense.rows, "csr matmul shape mismatch");
        let mut out = Matrix::zeros(self.n, dense.cols);
        for i in 0..self.n {
            let out_row = out.row_mut(i);
            for idx in self.offsets[i]..self.offsets[i + 1] {
                let a = self.values[idx];
                let b_row = dense.row(self.targets[idx]);
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }
}

/// Row-wise softmax with max-subtraction for stability.
pub fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for i in 0..out.rows {
        softmax_in_place(out.row_mut(i));
    }
    out
}

pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in row.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in row.iter_mut() {
        *x /= sum;
    }
}

/// Backpropagates through a row softmax: given `probs` (softmax output) and
/// the loss gradient on probs, returns the gradient on the logits row.
pub fn softmax_backward_row(probs: &[f64], grad_probs: &[f64], grad_logits: &mut [f64]) {
    let mut dot = 0.0;
    for (&p, &g) in probs.iter().zip(grad_probs) {
        dot += p * g;
    }
    for ((dz, &p), &g) in grad_logits.iter_mut().zip(probs).zip(grad_probs) {
        *dz = p * (g - dot);
    }
}

/// KL floor: every log argument is offset by this constant so posteriors
/// that underflow to zero stay differentiable and the results are bit-for-bit
/// reproducible.
pub const KL_EPS: f64 = 1e-12;

/// `KL(p || q)` with the additive floor inside every log argument.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len());
    let mut acc = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        acc += a * ((a + KL_EPS).ln() - (b + KL_EPS).ln());
    }
    acc
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn softplus(x: f64) -> f64 {
    // Stable formulation: softplus(x) = max(x, 0) + ln(1 + exp(-|x|)).
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_small() {
        let a = Matrix::from_rows(vec![vec![1.0, 2.0], vec![0.0, 3.0]]);
        let b = Matrix::from_rows(vec![vec![4.0, 0.0], vec![1.0, 5.0]]);
        let c = a.matmul(&b);
        assert_eq!(c.to_rows(), vec![vec![6.0, 10.0], vec![3.0, 15.0]]);
    }

    #[test]
    fn transpose_matmul_matches_explicit() {
        let a = Matrix::from_rows(vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 0.0]]);
        let b = Matrix::from_rows(vec![vec![1.0], vec![2.0], vec![3.0]]);
        let c = a.transpose_matmul(&b);
        assert_eq!(c.to_rows(), vec![vec![22.0], vec![10.0]]);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let m = Matrix::from_rows(vec![vec![1.0, 2.0, 3.0], vec![-5.0, 0.0, 5.0]]);
        let p = softmax_rows(&m);
        for i in 0..p.rows {
            let s: f64 = p.row(i).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_shift_invariance() {
        let m = Matrix::from_rows(vec![vec![0.3, -1.2, 2.5]]);
        let mut shifted = m.clone();
        for x in &mut shifted.data {
            *x += 17.0;
        }
        let p = softmax_rows(&m);
        let q = softmax_rows(&shifted);
        for (a, b) in p.data.iter().zip(&q.data) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn kl_of_identical_is_zero() {
        let p = [0.2, 0.3, 0.5];
        assert_eq!(kl_divergence(&p, &p), 0.0);
    }

    #[test]
    fn softplus_bounds() {
        for &x in &[-30.0, -1.0, 0.0, 1.0, 30.0] {
            let s = softplus(x);
            assert!(s >= x.max(0.0));
            assert!(s - x.max(0.0) <= std::f64::consts::LN_2 + 1e-15);
        }
        assert!((softplus(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
    }
}
