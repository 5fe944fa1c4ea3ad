//! Dense symmetric-matrix helpers on top of faer.

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, MatRef, Par, Side};
use serde::{Deserialize, Serialize};

use crate::error::{FjdError, Result};

/// Relative eigenvalue tolerance below which a negative eigenvalue is
/// rejected instead of clamped.
pub const PSD_REJECT_TOL: f64 = 1e-6;

/// Square matrix in row-major order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SquareMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(FjdError::DimensionMismatch {
                expected: dim * dim,
                got: data.len(),
            });
        }
        Ok(Self { dim, data })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![1.0; dim])
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let dim = diag.len();
        let mut m = Self::zeros(dim);
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * dim + i] = d;
        }
        m
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for r in rows {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(FjdError::DimensionMismatch {
                    expected: dim,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// Replaces the matrix with `(M + M^T) / 2`.
    pub fn symmetrize(&mut self) {
        let n = self.dim;
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (self.data[i * n + j] + self.data[j * n + i]);
                self.data[i * n + j] = avg;
                self.data[j * n + i] = avg;
            }
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn frobenius_distance(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    pub(crate) fn as_mat(&self) -> MatRef<'_, f64> {
        MatRef::from_row_major_slice(&self.data, self.dim, self.dim)
    }

    pub(crate) fn from_mat(m: MatRef<'_, f64>) -> Self {
        let dim = m.nrows();
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(m[(i, j)]);
            }
        }
        Self { dim, data }
    }
}

pub(crate) struct SymEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Column `k` is the eigenvector of `values[k]`.
    pub vectors: Mat<f64>,
}

pub(crate) fn sym_eigen(m: MatRef<'_, f64>) -> Result<SymEigen> {
    let evd = m.self_adjoint_eigen(Side::Lower).map_err(|_| FjdError::EigenFailure)?;
    let diag = evd.S().column_vector();
    let values = (0..diag.nrows()).map(|i| diag[i]).collect();
    Ok(SymEigen {
        values,
        vectors: evd.U().to_owned(),
    })
}

pub(crate) fn sym_eigenvalues(m: MatRef<'_, f64>) -> Result<Vec<f64>> {
    m.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|_| FjdError::EigenFailure)
}

/// Eigenvalues after PSD repair: entries in `[-tol * max, 0)` become zero,
/// anything lower is an error.
pub(crate) struct ClampedSpectrum {
    pub values: Vec<f64>,
    pub clamped: usize,
}

pub(crate) fn clamp_psd(values: &[f64], rel_tol: f64) -> Result<ClampedSpectrum> {
    let scale = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let tol = rel_tol * scale;
    let mut clamped = 0;
    let mut out = Vec::with_capacity(values.len());
    for &v in values {
        if v < 0.0 {
            if v < -tol {
                return Err(FjdError::NotPsd {
                    eigenvalue: v,
                    tolerance: tol,
                });
            }
            clamped += 1;
            out.push(0.0);
        } else {
            out.push(v);
        }
    }
    Ok(ClampedSpectrum { values: out, clamped })
}

/// Zeroes eigenvalues at or below `n * eps * max|lambda|`, the resolution
/// of a symmetric eigensolver. Square roots of such values would otherwise
/// inject errors of order `sqrt(eps)` into traces of rank-deficient
/// products.
pub(crate) fn drop_noise(values: &[f64]) -> Vec<f64> {
    let max = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let tol = values.len() as f64 * f64::EPSILON * max;
    values.iter().map(|&v| if v <= tol { 0.0 } else { v }).collect()
}

/// `U diag(f(values)) U^T`.
pub(crate) fn spectral_map(eig: &SymEigen, values: &[f64]) -> Mat<f64> {
    let n = eig.vectors.nrows();
    let mut scaled = eig.vectors.clone();
    for (k, &v) in values.iter().enumerate() {
        for i in 0..n {
            scaled[(i, k)] *= v;
        }
    }
    let mut out = Mat::<f64>::zeros(n, n);
    matmul(
        out.as_mut(),
        Accum::Replace,
        scaled.as_ref(),
        eig.vectors.transpose(),
        1.0,
        Par::Seq,
    );
    out
}

pub(crate) fn mat_mul(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Mat<f64> {
    let mut out = Mat::<f64>::zeros(a.nrows(), b.ncols());
    matmul(out.as_mut(), Accum::Replace, a, b, 1.0, Par::Seq);
    out
}

pub(crate) fn symmetrize_mat(m: &mut Mat<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Column means of a row-major block and `X_c^T X_c` of its centered rows.
pub(crate) fn centered_moments(rows: &[f64], n: usize, dim: usize) -> (Vec<f64>, Mat<f64>) {
    let mut mean = vec![0.0; dim];
    for r in rows.chunks_exact(dim.max(1)).take(n) {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    if n > 0 {
        mean.iter_mut().for_each(|m| *m /= n as f64);
    }
    let centered = Mat::<f64>::from_fn(n, dim, |i, j| rows[i * dim + j] - mean[j]);
    let mut comoment = Mat::<f64>::zeros(dim, dim);
    matmul(
        comoment.as_mut(),
        Accum::Replace,
        centered.transpose(),
        centered.as_ref(),
        1.0,
        Par::Seq,
    );
    (mean, comoment)
}
