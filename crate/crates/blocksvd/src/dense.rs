//! Dense row-major matrices and diagonal matrices.
//!
//! All block-local dense math lives here. Dense payloads are registered
//! with the [`crate::memory`] tracker so the blockwise driver can prove it
//! never holds more dense storage than its budget.

use crate::error::{Error, Result};
use crate::memory;

/// Dense row-major matrix of `f64`.
#[derive(Debug)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// Build from a row-major value vector, rejecting non-finite entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{}x{} matrix needs {} values, got {}",
                rows,
                cols,
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Dimension(format!(
                "{}x{} matrix contains non-finite values",
                rows, cols
            )));
        }
        Ok(Self::from_parts(rows, cols, data))
    }

    /// Build from nested row slices.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for r in rows {
            if r.len() != n_cols {
                return Err(Error::Dimension("ragged rows".into()));
            }
            data.extend_from_slice(r);
        }
        Self::from_vec(n_rows, n_cols, data)
    }

    pub(crate) fn from_parts(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        memory::register(data.len() * std::mem::size_of::<f64>());
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_parts(rows, cols, vec![0.0; rows * cols])
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Identity slice: ones on the leading diagonal of a rectangular matrix.
    pub fn eye(rows: usize, cols: usize) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows.min(cols) {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn set_column(&mut self, c: usize, v: &[f64]) {
        debug_assert_eq!(v.len(), self.rows);
        for (r, &x) in v.iter().enumerate() {
            self.set(r, c, x);
        }
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c));
            }
        }
        t
    }

    /// Standard product `self * b`.
    pub fn matmul(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != b.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, b.rows, b.cols
            )));
        }
        let mut out = DenseMatrix::zeros(self.rows, b.cols);
        for i in 0..self.rows {
            let a_row = self.row(i);
            let out_row = out.row_mut(i);
            for (k, &aik) in a_row.iter().enumerate() {
                if aik == 0.0 {
                    continue;
                }
                let b_row = &b.data[k * b.cols..(k + 1) * b.cols];
                for (o, &bkj) in out_row.iter_mut().zip(b_row) {
                    *o += aik * bkj;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵗ * b` without materializing the transpose.
    pub fn matmul_at_b(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != b.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply ({}x{})ᵗ by {}x{}",
                self.rows, self.cols, b.rows, b.cols
            )));
        }
        let mut out = DenseMatrix::zeros(self.cols, b.cols);
        for i in 0..self.rows {
            let a_row = self.row(i);
            let b_row = &b.data[i * b.cols..(i + 1) * b.cols];
            for (j, &aij) in a_row.iter().enumerate() {
                if aij == 0.0 {
                    continue;
                }
                let out_row = &mut out.data[j * b.cols..(j + 1) * b.cols];
                for (o, &bik) in out_row.iter_mut().zip(b_row) {
                    *o += aij * bik;
                }
            }
        }
        Ok(out)
    }

    /// `self * bᵗ` without materializing the transpose.
    pub fn matmul_a_bt(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != b.cols {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by ({}x{})ᵗ",
                self.rows, self.cols, b.rows, b.cols
            )));
        }
        let mut out = DenseMatrix::zeros(self.rows, b.rows);
        for i in 0..self.rows {
            let a_row = self.row(i);
            for j in 0..b.rows {
                let b_row = b.row(j);
                let dot: f64 = a_row.iter().zip(b_row).map(|(x, y)| x * y).sum();
                out.set(i, j, dot);
            }
        }
        Ok(out)
    }

    pub fn add(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != b.rows || self.cols != b.cols {
            return Err(Error::Dimension("addition shape mismatch".into()));
        }
        let data = self.data.iter().zip(&b.data).map(|(x, y)| x + y).collect();
        Ok(DenseMatrix::from_parts(self.rows, self.cols, data))
    }

    pub fn sub(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != b.rows || self.cols != b.cols {
            return Err(Error::Dimension("subtraction shape mismatch".into()));
        }
        let data = self.data.iter().zip(&b.data).map(|(x, y)| x - y).collect();
        Ok(DenseMatrix::from_parts(self.rows, self.cols, data))
    }

    pub fn scale(&self, s: f64) -> DenseMatrix {
        DenseMatrix::from_parts(self.rows, self.cols, self.data.iter().map(|x| x * s).collect())
    }

    /// Scale column `j` by `d[j]`.
    pub fn scale_columns(&self, d: &[f64]) -> Result<DenseMatrix> {
        if d.len() != self.cols {
            return Err(Error::Dimension("diagonal length mismatch".into()));
        }
        let mut out = DenseMatrix::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            for (o, (x, s)) in out.row_mut(r).iter_mut().zip(self.row(r).iter().zip(d)) {
                *o = x * s;
            }
        }
        Ok(out)
    }

    pub fn submatrix(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> DenseMatrix {
        debug_assert!(r1 <= self.rows && c1 <= self.cols && r0 <= r1 && c0 <= c1);
        let mut out = DenseMatrix::zeros(r1 - r0, c1 - c0);
        for r in r0..r1 {
            out.row_mut(r - r0).copy_from_slice(&self.row(r)[c0..c1]);
        }
        out
    }

    /// Horizontal concatenation `[self | b]`.
    pub fn hcat(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != b.rows {
            return Err(Error::Dimension("hcat row count mismatch".into()));
        }
        let mut out = DenseMatrix::zeros(self.rows, self.cols + b.cols);
        for r in 0..self.rows {
            out.row_mut(r)[..self.cols].copy_from_slice(self.row(r));
            out.row_mut(r)[self.cols..].copy_from_slice(b.row(r));
        }
        Ok(out)
    }

    /// Vertical concatenation `[self; b]`.
    pub fn vcat(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != b.cols {
            return Err(Error::Dimension("vcat column count mismatch".into()));
        }
        let mut data = Vec::with_capacity((self.rows + b.rows) * self.cols);
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&b.data);
        Ok(DenseMatrix::from_parts(self.rows + b.rows, self.cols, data))
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.frobenius_sq().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Largest |entry| of `self - selfᵗ`.
    pub fn max_asymmetry(&self) -> f64 {
        let mut m: f64 = 0.0;
        for r in 0..self.rows {
            for c in (r + 1)..self.cols.min(self.rows) {
                m = m.max((self.get(r, c) - self.get(c, r)).abs());
            }
        }
        m
    }

    /// Average the matrix with its transpose (square matrices only).
    pub fn symmetrized(&self) -> DenseMatrix {
        debug_assert_eq!(self.rows, self.cols);
        let mut out = DenseMatrix::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(r, c, 0.5 * (self.get(r, c) + self.get(c, r)));
            }
        }
        out
    }

    /// Largest |entry| of `selfᵗ·self − I`.
    pub fn orthonormality_defect(&self) -> f64 {
        let gram = self.matmul_at_b(self).expect("same matrix");
        let mut worst: f64 = 0.0;
        for r in 0..gram.rows {
            for c in 0..gram.cols {
                let target = if r == c { 1.0 } else { 0.0 };
                worst = worst.max((gram.get(r, c) - target).abs());
            }
        }
        worst
    }
}

impl Clone for DenseMatrix {
    fn clone(&self) -> Self {
        Self::from_parts(self.rows, self.cols, self.data.clone())
    }
}

impl Drop for DenseMatrix {
    fn drop(&mut self) {
        memory::release(self.data.len() * std::mem::size_of::<f64>());
    }
}

impl PartialEq for DenseMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.rows == other.rows && self.cols == other.cols && self.data == other.data
    }
}

/// Diagonal matrix stored as its diagonal, non-increasing by convention
/// when produced by a decomposition.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Diagonal {
    values: Vec<f64>,
}

impl Diagonal {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_non_increasing(&self) -> bool {
        self.values.windows(2).all(|w| w[0] >= w[1])
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let n = self.values.len();
        let mut m = DenseMatrix::zeros(n, n);
        for (i, &v) in self.values.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }
}
