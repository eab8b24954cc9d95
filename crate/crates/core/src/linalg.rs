//! Small dense linear algebra on row-major `f64` matrices.
//!
//! Only what the learners need: row access, symmetric positive definite
//! inversion through Cholesky, and a few vector kernels.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// An empty matrix with a fixed column count, to be grown with
    /// [`Matrix::push_row`].
    pub fn with_cols(cols: usize) -> Self {
        Self {
            rows: 0,
            cols,
            data: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(cols: usize, rows: &[R]) -> Result<Self> {
        let mut m = Self::with_cols(cols);
        for r in rows {
            m.push_row(r.as_ref())?;
        }
        Ok(m)
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: row.len(),
            });
        }
        self.data.extend_from_slice(row);
        self.rows += 1;
        Ok(())
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
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

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        self.iter_rows().map(|r| dot(r, v)).collect()
    }

    /// Largest `|a_ij - a_ji|` relative to the largest entry magnitude.
    pub fn relative_asymmetry(&self) -> f64 {
        let mut scale = 0.0f64;
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in 0..self.cols {
                scale = scale.max(self.get(i, j).abs());
                if j < self.rows && i < self.cols {
                    worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
                }
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }

    fn is_square(&self) -> bool {
        self.rows == self.cols
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Cosine similarity; zero when either vector is zero.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot(a, b) / (na * nb)
    }
}

/// Returns `x / ||x||`, or `x` unchanged if it is the zero vector.
pub fn l2_normalized(x: &[f64]) -> Vec<f64> {
    let n = norm(x);
    if n == 0.0 {
        x.to_vec()
    } else {
        x.iter().map(|v| v / n).collect()
    }
}

/// Lower-triangular Cholesky factor, or `None` if `a` is not numerically
/// positive definite.
pub fn cholesky(a: &Matrix) -> Option<Matrix> {
    if !a.is_square() {
        return None;
    }
    let n = a.rows;
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut diag = a.get(j, j);
        for k in 0..j {
            diag -= l.get(j, k) * l.get(j, k);
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return None;
        }
        let ljj = libm::sqrt(diag);
        l.set(j, j, ljj);
        for i in j + 1..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / ljj);
        }
    }
    Some(l)
}

/// Inverse of a symmetric positive definite matrix. The result is exactly
/// symmetric.
pub fn spd_inverse(a: &Matrix) -> Option<Matrix> {
    let l = cholesky(a)?;
    let n = a.rows;
    // Invert L column by column (forward substitution on unit vectors).
    let mut linv = Matrix::zeros(n, n);
    for c in 0..n {
        for i in c..n {
            let mut s = if i == c { 1.0 } else { 0.0 };
            for k in c..i {
                s -= l.get(i, k) * linv.get(k, c);
            }
            linv.set(i, c, s / l.get(i, i));
        }
    }
    // A^-1 = L^-T L^-1
    let mut inv = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = 0.0;
            for k in i..n {
                s += linv.get(k, i) * linv.get(k, j);
            }
            inv.set(i, j, s);
            inv.set(j, i, s);
        }
    }
    Some(inv)
}

/// Like [`spd_inverse`], but adds an escalating ridge to the diagonal until
/// the factorization succeeds. Covers all-zero and rank-deficient inputs.
pub fn spd_inverse_regularized(a: &Matrix) -> Matrix {
    if let Some(inv) = spd_inverse(a) {
        return inv;
    }
    let n = a.rows;
    let mean_diag = if n == 0 {
        1.0
    } else {
        (0..n).map(|i| a.get(i, i).abs()).sum::<f64>() / n as f64
    };
    let mut ridge = 1e-10 * mean_diag.max(1.0);
    loop {
        let mut shifted = a.clone();
        for i in 0..n {
            shifted.set(i, i, a.get(i, i) + ridge);
        }
        if let Some(inv) = spd_inverse(&shifted) {
            return inv;
        }
        ridge *= 10.0;
    }
}

/// Pooled within-class scatter, accumulated one row at a time.
///
/// Keeps per-class running means and counts together with the covariance
/// `Σ = S_w / N`, where `S_w` is the within-class scatter of every row seen
/// and `N` the total row count. Each update is the rank-one correction
/// `Σ ← (NΣ + n_c/(n_c+1)·(x-μ_c)(x-μ_c)ᵀ) / (N+1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatterAccumulator {
    covariance: Matrix,
    total: usize,
}

impl ScatterAccumulator {
    pub fn new(dimension: usize) -> Self {
        Self {
            covariance: Matrix::zeros(dimension, dimension),
            total: 0,
        }
    }

    /// Folds `x` into the class whose running mean and count are given, and
    /// advances that mean and count.
    pub fn push(&mut self, x: &[f64], class_mean: &mut [f64], class_count: &mut usize) {
        let d = self.covariance.cols();
        let n_c = *class_count as f64;
        let diff: Vec<f64> = x.iter().zip(class_mean.iter()).map(|(a, m)| a - m).collect();
        let weight = n_c / (n_c + 1.0);
        let total = self.total as f64;
        let denom = total + 1.0;
        for i in 0..d {
            for j in 0..=i {
                let v = (total * self.covariance.get(i, j) + weight * diff[i] * diff[j]) / denom;
                self.covariance.set(i, j, v);
                self.covariance.set(j, i, v);
            }
        }
        for (m, dv) in class_mean.iter_mut().zip(&diff) {
            *m += dv / (n_c + 1.0);
        }
        *class_count += 1;
        self.total += 1;
    }

    pub fn covariance(&self) -> &Matrix {
        &self.covariance
    }

    pub fn total(&self) -> usize {
        self.total
    }
}
