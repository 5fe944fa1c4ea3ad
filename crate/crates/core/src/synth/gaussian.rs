//! Multivariate normal samplers used by the closed-form demo.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::embedding::EmbeddingSet;
use crate::error::{FjdError, Result};
use crate::frechet::GaussianStats;
use crate::linalg::{clamp_psd, sym_eigen, SquareMatrix, PSD_REJECT_TOL};

/// Draws `n` rows from `N(mean, cov)`.
///
/// The covariance is factored as `U diag(sqrt(lambda))`, so singular
/// (PSD but not PD) covariances are accepted.
pub fn sample_gaussian(mean: &[f64], cov: &SquareMatrix, n: usize, seed: u64) -> Result<EmbeddingSet> {
    let d = mean.len();
    if cov.dim() != d {
        return Err(FjdError::DimensionMismatch {
            expected: d,
            got: cov.dim(),
        });
    }
    let mut sym = cov.clone();
    sym.symmetrize();
    let eig = sym_eigen(sym.as_mat())?;
    let spectrum = clamp_psd(&eig.values, PSD_REJECT_TOL)?;
    let root: Vec<f64> = spectrum.values.iter().map(|v| v.sqrt()).collect();
    // factor[i][k] = U[i][k] * sqrt(lambda_k)
    let factor: Vec<f64> = (0..d)
        .flat_map(|i| (0..d).map(move |k| (i, k)))
        .map(|(i, k)| eig.vectors[(i, k)] * root[k])
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(n * d);
    let mut z = vec![0.0; d];
    for _ in 0..n {
        for v in z.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        for i in 0..d {
            let row = &factor[i * d..(i + 1) * d];
            data.push(mean[i] + row.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>());
        }
    }
    EmbeddingSet::new(n, d, data)
}

/// Samples from the parameters of an analytic [`GaussianStats`].
pub fn sample_from_stats(stats: &GaussianStats, n: usize, seed: u64) -> Result<EmbeddingSet> {
    sample_gaussian(&stats.mean, &stats.cov, n, seed)
}

/// Two-dimensional convenience wrapper returning `(x, y)` columns.
pub fn sample_gaussian_2d(mean: [f64; 2], cov: [[f64; 2]; 2], n: usize, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    let set = sample_gaussian(&mean, &SquareMatrix::from_rows(&cov)?, n, seed)?;
    Ok(set.iter_rows().map(|r| (r[0], r[1])).unzip())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frechet::estimate_gaussian;

    #[test]
    fn sample_moments_converge() {
        let cov = SquareMatrix::from_rows(&[[4.0, 2.0], [2.0, 2.0]]).unwrap();
        let set = sample_gaussian(&[1.0, -1.0], &cov, 200_000, 3).unwrap();
        let est = estimate_gaussian(&set).unwrap();
        assert!((est.mean[0] - 1.0).abs() < 0.02);
        assert!((est.mean[1] + 1.0).abs() < 0.02);
        assert!(est.cov.max_abs_diff(&cov) < 0.05, "{:?}", est.cov);
    }

    #[test]
    fn singular_covariance_is_accepted() {
        let cov = SquareMatrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]]).unwrap();
        let set = sample_gaussian(&[0.0, 0.0], &cov, 100, 1).unwrap();
        for r in set.iter_rows() {
            assert!((r[0] - r[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn indefinite_covariance_is_rejected() {
        let cov = SquareMatrix::from_rows(&[[1.0, 2.0], [2.0, 1.0]]).unwrap();
        assert!(matches!(
            sample_gaussian(&[0.0, 0.0], &cov, 10, 1),
            Err(FjdError::NotPsd { .. })
        ));
    }

    #[test]
    fn seeded_draws_repeat() {
        let a = sample_gaussian_2d([0.0, 0.0], [[2.0, 0.0], [0.0, 2.0]], 10, 9).unwrap();
        let b = sample_gaussian_2d([0.0, 0.0], [[2.0, 0.0], [0.0, 2.0]], 10, 9).unwrap();
        assert_eq!(a, b);
    }
}
