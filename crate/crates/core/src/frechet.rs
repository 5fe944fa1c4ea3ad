//! Gaussian fitting and the squared Fréchet distance between Gaussians.
//!
//! Everything here works in `f64`. The distance reported is the squared
//! form `d^2 = |mu_a - mu_b|^2 + Tr(S_a) + Tr(S_b) - 2 Tr((S_a S_b)^(1/2))`.

use faer::MatRef;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingSet;
use crate::error::{FjdError, Result};
use crate::linalg::{
    centered_moments, clamp_psd, drop_noise, mat_mul, spectral_map, sym_eigen, sym_eigenvalues, symmetrize_mat,
    SquareMatrix, PSD_REJECT_TOL,
};

/// Rows per accumulator chunk in the parallel estimator. Fixed so the
/// reduction tree does not depend on the thread count.
pub const DEFAULT_CHUNK_ROWS: usize = 1024;

/// How the covariance accumulation is scheduled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parallelism {
    /// One batch pass on the calling thread.
    #[default]
    Sequential,
    /// Fixed-size chunks reduced on a dedicated pool of this many threads.
    Threads(usize),
}

/// Mean, covariance and sample count of a fitted Gaussian.
///
/// `count` is the number of rows the estimate came from, or 0 for
/// analytically specified parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianStats {
    pub mean: Vec<f64>,
    pub cov: SquareMatrix,
    pub count: u64,
}

impl GaussianStats {
    /// Analytic parameters. The covariance is symmetrized.
    pub fn analytic(mean: Vec<f64>, mut cov: SquareMatrix) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(FjdError::DimensionMismatch {
                expected: mean.len(),
                got: cov.dim(),
            });
        }
        cov.symmetrize();
        Ok(Self { mean, cov, count: 0 })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Gaussian of the coordinates listed in `idx` (in that order).
    pub fn marginal(&self, idx: &[usize]) -> Self {
        let mean = idx.iter().map(|&i| self.mean[i]).collect();
        let mut cov = SquareMatrix::zeros(idx.len());
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                cov.set(a, b, self.cov.get(i, j));
            }
        }
        Self {
            mean,
            cov,
            count: self.count,
        }
    }

    /// Stats of the same data after multiplying coordinates `from..` by
    /// `factor`. Exact for any linear rescaling, so re-fitting is unnecessary.
    pub fn scale_tail(&self, from: usize, factor: f64) -> Self {
        let d = self.dim();
        let w = |i: usize| if i >= from { factor } else { 1.0 };
        let mean = self.mean.iter().enumerate().map(|(i, m)| m * w(i)).collect();
        let mut cov = self.cov.clone();
        for i in 0..d {
            for j in 0..d {
                cov.set(i, j, self.cov.get(i, j) * w(i) * w(j));
            }
        }
        Self {
            mean,
            cov,
            count: self.count,
        }
    }
}

/// Streaming first and second moments.
///
/// `comoment` is the running sum of outer products of deviations from the
/// running mean; two accumulators merge with the pairwise update of Chan et al.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentAccumulator {
    dim: usize,
    count: u64,
    mean: Vec<f64>,
    comoment: SquareMatrix,
}

impl MomentAccumulator {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            count: 0,
            mean: vec![0.0; dim],
            comoment: SquareMatrix::zeros(dim),
        }
    }

    /// Batch accumulator over `n` contiguous rows.
    pub fn from_rows(rows: &[f64], n: usize, dim: usize) -> Result<Self> {
        if rows.len() != n * dim {
            return Err(FjdError::DimensionMismatch {
                expected: n * dim,
                got: rows.len(),
            });
        }
        if n == 0 {
            return Ok(Self::new(dim));
        }
        let (mean, comoment) = centered_moments(rows, n, dim);
        Ok(Self {
            dim,
            count: n as u64,
            mean,
            comoment: SquareMatrix::from_mat(comoment.as_ref()),
        })
    }

    pub fn from_set(set: &EmbeddingSet) -> Result<Self> {
        Self::from_rows(set.as_slice(), set.rows(), set.cols())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn comoment(&self) -> &SquareMatrix {
        &self.comoment
    }

    /// Welford rank-one update.
    pub fn push(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.dim {
            return Err(FjdError::DimensionMismatch {
                expected: self.dim,
                got: row.len(),
            });
        }
        self.count += 1;
        let n = self.count as f64;
        let delta: Vec<f64> = row.iter().zip(&self.mean).map(|(x, m)| x - m).collect();
        for (m, d) in self.mean.iter_mut().zip(&delta) {
            *m += d / n;
        }
        // delta * (x - new_mean)^T == delta * delta^T * (n - 1) / n
        let w = (n - 1.0) / n;
        for i in 0..self.dim {
            for j in 0..self.dim {
                let v = self.comoment.get(i, j) + w * delta[i] * delta[j];
                self.comoment.set(i, j, v);
            }
        }
        Ok(())
    }

    /// Combines two disjoint partial accumulations.
    pub fn merge(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(FjdError::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        if other.count == 0 {
            return Ok(self.clone());
        }
        if self.count == 0 {
            return Ok(other.clone());
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let delta: Vec<f64> = other.mean.iter().zip(&self.mean).map(|(b, a)| b - a).collect();
        let mean = self.mean.iter().zip(&delta).map(|(a, d)| a + d * nb / n).collect();
        let w = na * nb / n;
        let mut comoment = self.comoment.clone();
        for i in 0..self.dim {
            for j in 0..self.dim {
                let v = self.comoment.get(i, j) + other.comoment.get(i, j) + w * delta[i] * delta[j];
                comoment.set(i, j, v);
            }
        }
        Ok(Self {
            dim: self.dim,
            count: self.count + other.count,
            mean,
            comoment,
        })
    }

    /// Unbiased estimate with the `N - 1` denominator.
    pub fn finalize(&self) -> Result<GaussianStats> {
        if self.count < 2 {
            return Err(FjdError::InsufficientSamples {
                needed: 2,
                got: self.count as usize,
            });
        }
        let denom = (self.count - 1) as f64;
        let data = self.comoment.as_slice().iter().map(|v| v / denom).collect();
        let mut cov = SquareMatrix::new(self.dim, data)?;
        cov.symmetrize();
        Ok(GaussianStats {
            mean: self.mean.clone(),
            cov,
            count: self.count,
        })
    }
}

/// Merges two accumulators; see [`MomentAccumulator::merge`].
pub fn merge_accumulators(a: &MomentAccumulator, b: &MomentAccumulator) -> Result<MomentAccumulator> {
    a.merge(b)
}

/// Sample mean and `N - 1` covariance of the rows of `set`.
pub fn estimate_gaussian(set: &EmbeddingSet) -> Result<GaussianStats> {
    estimate_gaussian_with(set, Parallelism::Sequential)
}

pub fn estimate_gaussian_with(set: &EmbeddingSet, par: Parallelism) -> Result<GaussianStats> {
    if set.rows() < 2 {
        return Err(FjdError::InsufficientSamples {
            needed: 2,
            got: set.rows(),
        });
    }
    set.check_finite()?;
    match par {
        Parallelism::Sequential => MomentAccumulator::from_set(set)?.finalize(),
        Parallelism::Threads(threads) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads.max(1))
                .build()
                .map_err(|e| FjdError::InvalidArgument(format!("thread pool: {e}")))?;
            pool.install(|| chunked_accumulate(set, DEFAULT_CHUNK_ROWS))?.finalize()
        }
    }
}

/// Chunks are fixed-size and reduced left to right, so the result is
/// bit-identical for every thread count.
pub(crate) fn chunked_accumulate(set: &EmbeddingSet, chunk_rows: usize) -> Result<MomentAccumulator> {
    let n = set.rows();
    let bounds: Vec<(usize, usize)> = (0..n)
        .step_by(chunk_rows.max(1))
        .map(|s| (s, (s + chunk_rows).min(n)))
        .collect();
    let parts = bounds
        .par_iter()
        .map(|&(s, e)| MomentAccumulator::from_rows(set.row_range(s, e), e - s, set.cols()))
        .collect::<Result<Vec<_>>>()?;
    parts
        .iter()
        .try_fold(MomentAccumulator::new(set.cols()), |acc, p| acc.merge(p))
}

/// Output of [`frechet_distance`]. `value` is the squared distance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrechetResult {
    pub value: f64,
    /// `|mu_a - mu_b|^2`
    pub mean_term: f64,
    pub trace_a: f64,
    pub trace_b: f64,
    /// `Tr((S_a S_b)^(1/2))`
    pub trace_term: f64,
    /// Eigenvalues in `[-tol * max, 0)` that were set to zero.
    pub clamped_eigenvalues: usize,
}

impl FrechetResult {
    /// The distance recomputed from its parts, before the final clamp at 0.
    pub fn reconstruct(&self) -> f64 {
        self.mean_term + self.trace_a + self.trace_b - 2.0 * self.trace_term
    }
}

/// `Tr((A B)^(1/2))` and the number of clamped eigenvalues.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceSqrt {
    pub value: f64,
    pub clamped: usize,
}

/// `Tr((A B)^(1/2))` for symmetric PSD `A`, `B`.
///
/// With `S = A^(1/2)`, the product `A B` is similar to the symmetric PSD
/// matrix `S B S`, so the trace of the square root is the sum of square
/// roots of its eigenvalues. Only the lower triangles are read.
pub fn trace_sqrt_product(a: &SquareMatrix, b: &SquareMatrix) -> Result<f64> {
    trace_sqrt_product_detailed(a, b).map(|t| t.value)
}

pub fn trace_sqrt_product_detailed(a: &SquareMatrix, b: &SquareMatrix) -> Result<TraceSqrt> {
    if a.dim() != b.dim() {
        return Err(FjdError::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    if a.dim() == 0 {
        return Ok(TraceSqrt { value: 0.0, clamped: 0 });
    }
    trace_sqrt_mats(a.as_mat(), b.as_mat())
}

fn trace_sqrt_mats(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Result<TraceSqrt> {
    let eig_a = sym_eigen(a)?;
    let spec_a = clamp_psd(&eig_a.values, PSD_REJECT_TOL)?;
    let roots: Vec<f64> = drop_noise(&spec_a.values).iter().map(|v| v.sqrt()).collect();
    let sqrt_a = spectral_map(&eig_a, &roots);
    let mut inner = mat_mul(mat_mul(sqrt_a.as_ref(), b).as_ref(), sqrt_a.as_ref());
    symmetrize_mat(&mut inner);
    let spec = clamp_psd(&sym_eigenvalues(inner.as_ref())?, PSD_REJECT_TOL)?;
    // ascending order; summing small to large
    let value = drop_noise(&spec.values).iter().map(|v| v.sqrt()).sum();
    Ok(TraceSqrt {
        value,
        clamped: spec_a.clamped + spec.clamped,
    })
}

/// Squared Fréchet distance between two Gaussians.
pub fn frechet_distance(a: &GaussianStats, b: &GaussianStats) -> Result<FrechetResult> {
    if a.dim() != b.dim() {
        return Err(FjdError::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let mean_term: f64 = a.mean.iter().zip(&b.mean).map(|(x, y)| (x - y) * (x - y)).sum();
    let trace_a = a.cov.trace();
    let trace_b = b.cov.trace();

    // (S S)^(1/2) = S for PSD S; answer exactly rather than through two
    // eigensolves. Still validate PSD-ness so bad inputs are not masked.
    if a.cov == b.cov {
        let spec = clamp_psd(&sym_eigenvalues(a.cov.as_mat())?, PSD_REJECT_TOL)?;
        let result = FrechetResult {
            value: mean_term,
            mean_term,
            trace_a,
            trace_b,
            trace_term: trace_a,
            clamped_eigenvalues: spec.clamped,
        };
        return Ok(result);
    }

    let ts = trace_sqrt_product_detailed(&a.cov, &b.cov)?;
    let raw = mean_term + trace_a + trace_b - 2.0 * ts.value;
    Ok(FrechetResult {
        value: raw.max(0.0),
        mean_term,
        trace_a,
        trace_b,
        trace_term: ts.value,
        clamped_eigenvalues: ts.clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sigma1() -> SquareMatrix {
        SquareMatrix::from_rows(&[[4.0, 2.0], [2.0, 2.0]]).unwrap()
    }

    fn sigma2() -> SquareMatrix {
        SquareMatrix::from_rows(&[[2.1, 2.0], [2.0, 2.0]]).unwrap()
    }

    /// Closed form for 2x2: (sqrt(l1) + sqrt(l2))^2 = tr(M) + 2 sqrt(det(M)).
    fn trace_sqrt_2x2_oracle(a: &SquareMatrix, b: &SquareMatrix) -> f64 {
        let m = |i: usize, j: usize| (0..2).map(|k| a.get(i, k) * b.get(k, j)).sum::<f64>();
        let tr = m(0, 0) + m(1, 1);
        let det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
        (tr + 2.0 * det.sqrt()).sqrt()
    }

    #[test]
    fn estimate_constant_rows_has_zero_cov() {
        let set = EmbeddingSet::from_rows(&[[1.0, 2.0]; 5]).unwrap();
        let g = estimate_gaussian(&set).unwrap();
        assert_eq!(g.mean, vec![1.0, 2.0]);
        assert!(g.cov.as_slice().iter().all(|&v| v == 0.0));
        assert_eq!(g.count, 5);
    }

    #[test]
    fn estimate_two_rows() {
        let set = EmbeddingSet::from_rows(&[[0.0, 0.0], [2.0, 0.0]]).unwrap();
        let g = estimate_gaussian(&set).unwrap();
        assert_eq!(g.mean, vec![1.0, 0.0]);
        assert_eq!(g.cov.as_slice(), &[2.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn estimate_rejects_single_row_and_nan() {
        let one = EmbeddingSet::from_rows(&[[0.0, 1.0]]).unwrap();
        assert!(matches!(
            estimate_gaussian(&one),
            Err(FjdError::InsufficientSamples { needed: 2, got: 1 })
        ));
        let bad = EmbeddingSet::from_rows(&[[0.0, 1.0], [f64::INFINITY, 0.0], [1.0, 1.0]]).unwrap();
        assert!(matches!(
            estimate_gaussian(&bad),
            Err(FjdError::InvalidEmbedding { row: 1, col: 0 })
        ));
    }

    #[test]
    fn merge_with_empty_is_identity() {
        let set = EmbeddingSet::from_rows(&[[1.0, 0.5], [2.0, -1.0], [0.0, 3.0]]).unwrap();
        let acc = MomentAccumulator::from_set(&set).unwrap();
        let empty = MomentAccumulator::new(2);
        assert_eq!(merge_accumulators(&empty, &acc).unwrap(), acc);
        assert_eq!(merge_accumulators(&acc, &empty).unwrap(), acc);
    }

    #[test]
    fn merge_two_single_rows() {
        let (r1, r2) = ([1.0, 3.0], [5.0, -1.0]);
        let mut a = MomentAccumulator::new(2);
        a.push(&r1).unwrap();
        let mut b = MomentAccumulator::new(2);
        b.push(&r2).unwrap();
        let g = a.merge(&b).unwrap().finalize().unwrap();
        let m = [3.0, 1.0];
        for i in 0..2 {
            for j in 0..2 {
                let want = (r1[i] - m[i]) * (r1[j] - m[j]) + (r2[i] - m[i]) * (r2[j] - m[j]);
                assert!((g.cov.get(i, j) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn merge_rejects_dimension_mismatch() {
        let err = MomentAccumulator::new(2).merge(&MomentAccumulator::new(3)).unwrap_err();
        assert!(matches!(err, FjdError::DimensionMismatch { .. }));
    }

    #[test]
    fn push_matches_batch() {
        let rows = [[1.0, 2.0, 0.0], [0.5, -1.0, 4.0], [3.0, 3.0, 3.0], [-2.0, 0.0, 1.0]];
        let mut acc = MomentAccumulator::new(3);
        for r in &rows {
            acc.push(r).unwrap();
        }
        let batch = estimate_gaussian(&EmbeddingSet::from_rows(&rows).unwrap()).unwrap();
        let streamed = acc.finalize().unwrap();
        assert!(streamed.cov.max_abs_diff(&batch.cov) < 1e-12);
    }

    #[test]
    fn trace_sqrt_identity_and_diagonal() {
        for d in [1, 3, 10] {
            let i = SquareMatrix::identity(d);
            assert!((trace_sqrt_product(&i, &i).unwrap() - d as f64).abs() < 1e-12);
        }
        let a = SquareMatrix::diagonal(&[4.0]);
        let b = SquareMatrix::diagonal(&[9.0]);
        assert!((trace_sqrt_product(&a, &b).unwrap() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn trace_sqrt_two_by_two() {
        let oracle = trace_sqrt_2x2_oracle(&sigma1(), &sigma2());
        // eigenvalues (20.4 +- sqrt(412.96)) / 2
        let l1 = (20.4 + 412.96_f64.sqrt()) / 2.0;
        let l2 = (20.4 - 412.96_f64.sqrt()) / 2.0;
        assert!((oracle - (l1.sqrt() + l2.sqrt())).abs() < 1e-9);
        assert!((oracle - 4.71057).abs() < 1e-4);
        let got = trace_sqrt_product(&sigma1(), &sigma2()).unwrap();
        assert!((got - oracle).abs() < 1e-10);
    }

    #[test]
    fn trace_sqrt_rejects_indefinite() {
        let a = SquareMatrix::diagonal(&[1.0, -0.5]);
        let err = trace_sqrt_product(&a, &SquareMatrix::identity(2)).unwrap_err();
        match err {
            FjdError::NotPsd { eigenvalue, .. } => assert_eq!(eigenvalue, -0.5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn frechet_identical_is_zero() {
        let g = GaussianStats::analytic(vec![1.0, -2.0], sigma1()).unwrap();
        let r = frechet_distance(&g, &g).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(r.reconstruct(), 0.0);
    }

    #[test]
    fn frechet_mean_shift_1d() {
        let a = GaussianStats::analytic(vec![0.0], SquareMatrix::diagonal(&[1.0])).unwrap();
        let b = GaussianStats::analytic(vec![3.0], SquareMatrix::diagonal(&[1.0])).unwrap();
        assert!((frechet_distance(&a, &b).unwrap().value - 9.0).abs() < 1e-12);
    }

    #[test]
    fn frechet_two_dimensional_pair() {
        let a = GaussianStats::analytic(vec![0.0, 0.0], sigma1()).unwrap();
        let b = GaussianStats::analytic(vec![0.0, 0.0], sigma2()).unwrap();
        let r = frechet_distance(&a, &b).unwrap();
        let oracle = 10.1 - 2.0 * trace_sqrt_2x2_oracle(&sigma1(), &sigma2());
        assert!((r.value - oracle).abs() < 1e-10);
        assert!((r.value - 0.6789).abs() < 1e-3);
        assert!((r.reconstruct() - r.value).abs() < 1e-12);
    }

    #[test]
    fn frechet_same_marginal_is_exactly_zero() {
        let a = GaussianStats::analytic(vec![0.0], SquareMatrix::diagonal(&[2.0])).unwrap();
        let b = GaussianStats::analytic(vec![0.0], SquareMatrix::diagonal(&[2.0])).unwrap();
        assert_eq!(frechet_distance(&a, &b).unwrap().value, 0.0);
    }

    #[test]
    fn scale_tail_matches_refit() {
        let set =
            EmbeddingSet::from_rows(&[[1.0, 2.0, 0.5], [0.0, -1.0, 1.5], [2.0, 0.0, -0.5], [1.0, 1.0, 1.0]]).unwrap();
        let scaled_rows: Vec<Vec<f64>> = set.iter_rows().map(|r| vec![r[0], r[1] * 3.0, r[2] * 3.0]).collect();
        let refit = estimate_gaussian(&EmbeddingSet::from_rows(&scaled_rows).unwrap()).unwrap();
        let scaled = estimate_gaussian(&set).unwrap().scale_tail(1, 3.0);
        assert!(scaled.cov.max_abs_diff(&refit.cov) < 1e-12);
    }
}
