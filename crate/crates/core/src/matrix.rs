//! Dense row-major matrices of 64-bit floats.
//!
//! Every other module's math runs on [`Matrix`]. A matrix is an immutable
//! value once produced; operations return fresh matrices. 64-bit floats are
//! used throughout: the models here are tiny, and the extra precision keeps
//! finite-difference gradient checks tight.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major data. Fails when the data length does
    /// not equal `rows * cols` or any entry is non-finite.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidInput(alloc::format!(
                "matrix data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        let m = Matrix { rows, cols, data };
        if !m.all_finite() {
            return Err(Error::NonFinite { op: "from_vec" });
        }
        Ok(m)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                lhs: self.shape(),
                rhs: other.shape(),
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let lhs_row = &other.data[k * other.cols..(k + 1) * other.cols];
                let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, b) in out_row.iter_mut().zip(lhs_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with("add", other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with("sub", other, |a, b| a - b)
    }

    /// Elementwise (Hadamard) product.
    pub fn hadamard(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with("hadamard", other, |a, b| a * b)
    }

    fn zip_with(
        &self,
        op: &'static str,
        other: &Matrix,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Matrix> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                op,
                lhs: self.shape(),
                rhs: other.shape(),
            });
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn scale(&self, c: f64) -> Matrix {
        self.map(|x| c * x)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// Elementwise max(0, x). The subgradient at 0 is taken as 0 by the tape.
    pub fn relu(&self) -> Matrix {
        self.map(|x| if x > 0.0 { x } else { 0.0 })
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    /// Column vector (rows x 1) of row sums.
    pub fn row_sums(&self) -> Matrix {
        let mut out = Matrix::zeros(self.rows, 1);
        for i in 0..self.rows {
            out.data[i] = self.row(i).iter().sum();
        }
        out
    }

    /// Row vector (1 x cols) holding the mean of each column.
    pub fn mean_rows(&self) -> Matrix {
        let mut out = Matrix::zeros(1, self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j] += self.data[i * self.cols + j];
            }
        }
        let inv = 1.0 / self.rows as f64;
        for v in &mut out.data {
            *v *= inv;
        }
        out
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Squared Frobenius norm.
    pub fn frob_sq(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        debug_assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn clamp(&self, lo: f64, hi: f64) -> Matrix {
        self.map(|x| x.clamp(lo, hi))
    }

    /// Index of the largest entry in row `i` (first one on ties).
    pub fn argmax_row(&self, i: usize) -> usize {
        let row = self.row(i);
        let mut best = 0;
        for (j, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = j;
            }
        }
        best
    }
}

/// Row-wise softmax, numerically stabilized by max-subtraction.
pub fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(logits.rows(), logits.cols());
    for i in 0..logits.rows() {
        let row = logits.row(i);
        let max = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let mut denom = 0.0;
        for (j, &x) in row.iter().enumerate() {
            let e = libm::exp(x - max);
            out.set(i, j, e);
            denom += e;
        }
        for j in 0..logits.cols() {
            out.set(i, j, out.get(i, j) / denom);
        }
    }
    out
}

/// Mean over rows of `-log softmax(logits)[label]`.
pub fn softmax_cross_entropy(logits: &Matrix, labels: &[usize]) -> Result<f64> {
    if logits.rows() == 0 || logits.rows() != labels.len() {
        return Err(Error::ShapeMismatch {
            op: "softmax_cross_entropy",
            lhs: logits.shape(),
            rhs: (labels.len(), 1),
        });
    }
    let classes = logits.cols();
    let mut total = 0.0;
    for (i, &label) in labels.iter().enumerate() {
        if label >= classes {
            return Err(Error::LabelOutOfRange { label, classes });
        }
        let row = logits.row(i);
        let max = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let lse = max + libm::log(row.iter().map(|&x| libm::exp(x - max)).sum::<f64>());
        total += lse - row[label];
    }
    Ok(total / labels.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn matmul_identity_is_noop() {
        let m = Matrix::from_vec(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let id = Matrix::identity(3);
        assert_eq!(id.matmul(&m).unwrap(), m);
    }

    #[test]
    fn matmul_hand_value() {
        let a = Matrix::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = Matrix::from_vec(2, 1, vec![1.0, 1.0]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.data(), &[3.0, 7.0]);
    }

    #[test]
    fn matmul_shape_mismatch_reports_both_shapes() {
        let a = Matrix::zeros(2, 3);
        let b = Matrix::zeros(4, 2);
        match a.matmul(&b) {
            Err(Error::ShapeMismatch { lhs, rhs, .. }) => {
                assert_eq!(lhs, (2, 3));
                assert_eq!(rhs, (4, 2));
            }
            other => panic!("expected shape mismatch, got {other:?}"),
        }
    }

    #[test]
    fn relu_splits_signs_and_is_idempotent() {
        let m = Matrix::from_vec(1, 2, vec![-1.0, 2.0]).unwrap();
        let r = m.relu();
        assert_eq!(r.data(), &[0.0, 2.0]);
        assert_eq!(r.relu(), r);
        let neg = Matrix::from_vec(2, 2, vec![-1.0, -2.0, -0.5, -3.0]).unwrap();
        assert_eq!(neg.relu(), Matrix::zeros(2, 2));
    }

    #[test]
    fn cross_entropy_uniform_logits_is_ln_c() {
        let logits = Matrix::zeros(1, 4);
        let loss = softmax_cross_entropy(&logits, &[2]).unwrap();
        assert!((loss - libm::log(4.0)).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_saturated_logit_is_near_zero() {
        let logits = Matrix::from_vec(1, 3, vec![1000.0, 0.0, 0.0]).unwrap();
        let loss = softmax_cross_entropy(&logits, &[0]).unwrap();
        assert!(loss.abs() < 1e-9);
    }

    #[test]
    fn cross_entropy_hand_value() {
        // logits [0, ln 3], label 0: softmax = [1/4, 3/4], loss = ln 4.
        let logits = Matrix::from_vec(1, 2, vec![0.0, libm::log(3.0)]).unwrap();
        let loss = softmax_cross_entropy(&logits, &[0]).unwrap();
        assert!((loss - libm::log(4.0)).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_rejects_out_of_range_label() {
        let logits = Matrix::zeros(1, 3);
        assert!(matches!(
            softmax_cross_entropy(&logits, &[3]),
            Err(Error::LabelOutOfRange { label: 3, classes: 3 })
        ));
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let logits = Matrix::from_vec(2, 3, vec![0.3, -1.2, 4.0, 100.0, 99.0, 98.0]).unwrap();
        let sm = softmax_rows(&logits);
        for i in 0..2 {
            let s: f64 = sm.row(i).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }
}
