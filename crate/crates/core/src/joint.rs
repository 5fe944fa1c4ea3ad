//! FID and FJD over paired image/conditioning embeddings.
//!
//! The joint embedding of a pair is the concatenation `[f(x) | alpha * h(y)]`.
//! With `alpha = 0` the conditioning block is identically zero and FJD
//! reduces to FID.

use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingSet;
use crate::error::{FjdError, Result};
use crate::frechet::{estimate_gaussian_with, frechet_distance, FrechetResult, GaussianStats, Parallelism};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlphaMode {
    /// Ratio of mean image-embedding norm to mean conditioning norm,
    /// measured on the reference pairs.
    Auto,
    Fixed,
}

/// The conditioning weight and the identifiers that must accompany every
/// reported score.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointConfig {
    /// Meaningful for `AlphaMode::Auto` only after [`JointConfig::resolve`].
    pub alpha: f64,
    pub alpha_mode: AlphaMode,
    pub image_embedder_id: String,
    pub cond_embedder_id: String,
    pub reference_id: String,
}

impl JointConfig {
    pub fn auto(
        image_embedder_id: impl Into<String>,
        cond_embedder_id: impl Into<String>,
        reference_id: impl Into<String>,
    ) -> Self {
        Self {
            alpha: 0.0,
            alpha_mode: AlphaMode::Auto,
            image_embedder_id: image_embedder_id.into(),
            cond_embedder_id: cond_embedder_id.into(),
            reference_id: reference_id.into(),
        }
    }

    pub fn fixed(
        alpha: f64,
        image_embedder_id: impl Into<String>,
        cond_embedder_id: impl Into<String>,
        reference_id: impl Into<String>,
    ) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self {
            alpha,
            alpha_mode: AlphaMode::Fixed,
            image_embedder_id: image_embedder_id.into(),
            cond_embedder_id: cond_embedder_id.into(),
            reference_id: reference_id.into(),
        })
    }

    /// Freezes alpha: calibrates on `reference` in auto mode, validates it
    /// otherwise. Generated data never enters here.
    pub fn resolve(&self, reference: &PairedEmbeddings) -> Result<Self> {
        let mut out = self.clone();
        match self.alpha_mode {
            AlphaMode::Auto => out.alpha = calibrate_alpha(reference)?,
            AlphaMode::Fixed => check_alpha(self.alpha)?,
        }
        Ok(out)
    }

    pub fn metadata(&self, seed: Option<u64>) -> ScoreMetadata {
        ScoreMetadata {
            alpha: self.alpha,
            alpha_6dp: format!("{:.6}", self.alpha),
            alpha_mode: self.alpha_mode,
            image_embedder_id: self.image_embedder_id.clone(),
            cond_embedder_id: self.cond_embedder_id.clone(),
            reference_id: self.reference_id.clone(),
            seed,
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha >= 0.0 {
        Ok(())
    } else {
        Err(FjdError::InvalidArgument(format!(
            "alpha must be finite and non-negative, got {alpha}"
        )))
    }
}

/// Settings reported alongside every score.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreMetadata {
    pub alpha: f64,
    pub alpha_6dp: String,
    pub alpha_mode: AlphaMode,
    pub image_embedder_id: String,
    pub cond_embedder_id: String,
    pub reference_id: String,
    pub seed: Option<u64>,
}

/// Row-aligned image and conditioning embeddings.
#[derive(Clone, Debug, PartialEq)]
pub struct PairedEmbeddings {
    image: EmbeddingSet,
    cond: EmbeddingSet,
}

impl PairedEmbeddings {
    pub fn new(image: EmbeddingSet, cond: EmbeddingSet) -> Result<Self> {
        if image.rows() != cond.rows() {
            return Err(FjdError::RowCountMismatch {
                image: image.rows(),
                cond: cond.rows(),
            });
        }
        Ok(Self { image, cond })
    }

    pub fn image(&self) -> &EmbeddingSet {
        &self.image
    }

    pub fn cond(&self) -> &EmbeddingSet {
        &self.cond
    }

    pub fn rows(&self) -> usize {
        self.image.rows()
    }

    pub fn image_dim(&self) -> usize {
        self.image.cols()
    }

    pub fn cond_dim(&self) -> usize {
        self.cond.cols()
    }

    /// Same permutation applied to both members.
    pub fn permute(&self, order: &[usize]) -> Self {
        Self {
            image: self.image.select_rows(order),
            cond: self.cond.select_rows(order),
        }
    }

    /// `[image | alpha * cond]` row by row.
    pub fn merged(&self, alpha: f64) -> EmbeddingSet {
        let (di, dc) = (self.image_dim(), self.cond_dim());
        let mut data = Vec::with_capacity(self.rows() * (di + dc));
        for (f, h) in self.image.iter_rows().zip(self.cond.iter_rows()) {
            data.extend_from_slice(f);
            data.extend(h.iter().map(|v| alpha * v));
        }
        EmbeddingSet::new(self.rows(), di + dc, data)
            .expect("merged length is rows * (di + dc)")
            .with_source(self.image.source())
    }
}

/// Mean image-embedding norm over mean conditioning-embedding norm.
pub fn calibrate_alpha(reference: &PairedEmbeddings) -> Result<f64> {
    if reference.rows() == 0 {
        return Err(FjdError::InsufficientSamples { needed: 1, got: 0 });
    }
    reference.image.check_finite()?;
    reference.cond.check_finite()?;
    let cond_norm = reference.cond.mean_row_norm();
    if cond_norm == 0.0 {
        return Err(FjdError::DegenerateConditioning);
    }
    Ok(reference.image.mean_row_norm() / cond_norm)
}

/// `[f | alpha * h]`.
pub fn merge_embedding(f: &[f64], h: &[f64], alpha: f64) -> Vec<f64> {
    f.iter().copied().chain(h.iter().map(|v| alpha * v)).collect()
}

pub fn compute_fid(reference: &EmbeddingSet, generated: &EmbeddingSet) -> Result<FrechetResult> {
    compute_fid_with(reference, generated, Parallelism::Sequential)
}

pub fn compute_fid_with(reference: &EmbeddingSet, generated: &EmbeddingSet, par: Parallelism) -> Result<FrechetResult> {
    if reference.cols() != generated.cols() {
        return Err(FjdError::DimensionMismatch {
            expected: reference.cols(),
            got: generated.cols(),
        });
    }
    let a = estimate_gaussian_with(reference, par)?;
    let b = estimate_gaussian_with(generated, par)?;
    frechet_distance(&a, &b)
}

/// An FJD value together with the settings it was computed under.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointScore {
    pub frechet: FrechetResult,
    pub metadata: ScoreMetadata,
}

impl JointScore {
    pub fn value(&self) -> f64 {
        self.frechet.value
    }
}

pub fn compute_fjd(
    reference: &PairedEmbeddings,
    generated: &PairedEmbeddings,
    config: &JointConfig,
) -> Result<JointScore> {
    compute_fjd_with(reference, generated, config, Parallelism::Sequential)
}

pub fn compute_fjd_with(
    reference: &PairedEmbeddings,
    generated: &PairedEmbeddings,
    config: &JointConfig,
    par: Parallelism,
) -> Result<JointScore> {
    let eval = JointEvaluator::new(reference, config, par)?;
    let frechet = eval.fjd(generated)?;
    Ok(JointScore {
        frechet,
        metadata: eval.config().metadata(None),
    })
}

/// FJD for each alpha, in input order.
///
/// Joint statistics are fitted once with unit weight and rescaled per
/// alpha; a linear rescaling of the conditioning block maps the fitted
/// Gaussian exactly.
pub fn sweep_alpha(
    reference: &PairedEmbeddings,
    generated: &PairedEmbeddings,
    alphas: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if alphas.is_empty() {
        return Err(FjdError::InvalidArgument("alpha list is empty".into()));
    }
    for &a in alphas {
        check_alpha(a)?;
    }
    check_compatible(reference, generated)?;
    let split = reference.image_dim();
    let ref_stats = estimate_gaussian_with(&reference.merged(1.0), Parallelism::Sequential)?;
    let gen_stats = estimate_gaussian_with(&generated.merged(1.0), Parallelism::Sequential)?;
    alphas
        .iter()
        .map(|&a| {
            let d = frechet_distance(&ref_stats.scale_tail(split, a), &gen_stats.scale_tail(split, a))?;
            Ok((a, d.value))
        })
        .collect()
}

fn check_compatible(reference: &PairedEmbeddings, generated: &PairedEmbeddings) -> Result<()> {
    if reference.image_dim() != generated.image_dim() {
        return Err(FjdError::DimensionMismatch {
            expected: reference.image_dim(),
            got: generated.image_dim(),
        });
    }
    if reference.cond_dim() != generated.cond_dim() {
        return Err(FjdError::DimensionMismatch {
            expected: reference.cond_dim(),
            got: generated.cond_dim(),
        });
    }
    Ok(())
}

/// Reference statistics fitted once and reused against many generated sets.
#[derive(Clone, Debug)]
pub struct JointEvaluator {
    config: JointConfig,
    image_dim: usize,
    cond_dim: usize,
    reference_image: GaussianStats,
    reference_joint: GaussianStats,
    par: Parallelism,
}

impl JointEvaluator {
    pub fn new(reference: &PairedEmbeddings, config: &JointConfig, par: Parallelism) -> Result<Self> {
        let config = config.resolve(reference)?;
        let reference_image = estimate_gaussian_with(reference.image(), par)?;
        let reference_joint = estimate_gaussian_with(&reference.merged(config.alpha), par)?;
        Ok(Self {
            config,
            image_dim: reference.image_dim(),
            cond_dim: reference.cond_dim(),
            reference_image,
            reference_joint,
            par,
        })
    }

    pub fn config(&self) -> &JointConfig {
        &self.config
    }

    pub fn alpha(&self) -> f64 {
        self.config.alpha
    }

    pub fn reference_joint(&self) -> &GaussianStats {
        &self.reference_joint
    }

    fn check(&self, generated: &PairedEmbeddings) -> Result<()> {
        if generated.image_dim() != self.image_dim {
            return Err(FjdError::DimensionMismatch {
                expected: self.image_dim,
                got: generated.image_dim(),
            });
        }
        if generated.cond_dim() != self.cond_dim {
            return Err(FjdError::DimensionMismatch {
                expected: self.cond_dim,
                got: generated.cond_dim(),
            });
        }
        Ok(())
    }

    pub fn fid(&self, generated_images: &EmbeddingSet) -> Result<FrechetResult> {
        if generated_images.cols() != self.image_dim {
            return Err(FjdError::DimensionMismatch {
                expected: self.image_dim,
                got: generated_images.cols(),
            });
        }
        let g = estimate_gaussian_with(generated_images, self.par)?;
        frechet_distance(&self.reference_image, &g)
    }

    pub fn fjd(&self, generated: &PairedEmbeddings) -> Result<FrechetResult> {
        self.check(generated)?;
        let g = estimate_gaussian_with(&generated.merged(self.config.alpha), self.par)?;
        frechet_distance(&self.reference_joint, &g)
    }

    /// `(fid, fjd)` against the frozen reference.
    pub fn score(&self, generated: &PairedEmbeddings) -> Result<(FrechetResult, FrechetResult)> {
        Ok((self.fid(generated.image())?, self.fjd(generated)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(rows: &[&[f64]]) -> EmbeddingSet {
        EmbeddingSet::from_rows(rows).unwrap()
    }

    #[test]
    fn alpha_from_constant_norms() {
        let p = PairedEmbeddings::new(
            set(&[&[4.0, 0.0], &[0.0, 4.0], &[0.0, -4.0]]),
            set(&[&[2.0], &[-2.0], &[2.0]]),
        )
        .unwrap();
        assert_eq!(calibrate_alpha(&p).unwrap(), 2.0);
    }

    #[test]
    fn alpha_with_one_hot_conditioning() {
        let p = PairedEmbeddings::new(set(&[&[3.0, 0.0], &[0.0, 5.0]]), set(&[&[1.0, 0.0], &[0.0, 1.0]])).unwrap();
        assert_eq!(calibrate_alpha(&p).unwrap(), 4.0);
    }

    #[test]
    fn alpha_rejects_zero_conditioning() {
        let p = PairedEmbeddings::new(set(&[&[1.0], &[2.0]]), set(&[&[0.0], &[0.0]])).unwrap();
        assert!(matches!(calibrate_alpha(&p), Err(FjdError::DegenerateConditioning)));
    }

    #[test]
    fn merge_definition() {
        assert_eq!(merge_embedding(&[1.0, 2.0], &[3.0], 2.0), vec![1.0, 2.0, 6.0]);
        assert_eq!(merge_embedding(&[1.0, 2.0], &[3.0], 0.0), vec![1.0, 2.0, 0.0]);
        assert_eq!(merge_embedding(&vec![0.0; 2048], &vec![1.0; 128], 1.0).len(), 2176);
    }

    #[test]
    fn paired_rejects_row_mismatch() {
        let err = PairedEmbeddings::new(set(&[&[1.0], &[2.0]]), set(&[&[1.0]])).unwrap_err();
        assert!(matches!(err, FjdError::RowCountMismatch { image: 2, cond: 1 }));
    }

    #[test]
    fn metadata_prints_alpha_to_six_decimals() {
        let cfg = JointConfig::fixed(17.465029, "inception", "onehot", "train").unwrap();
        assert_eq!(cfg.metadata(Some(3)).alpha_6dp, "17.465029");
    }

    #[test]
    fn fixed_rejects_negative_alpha() {
        assert!(JointConfig::fixed(-1.0, "a", "b", "c").is_err());
    }

    #[test]
    fn sweep_rejects_empty_grid() {
        let p = PairedEmbeddings::new(set(&[&[1.0], &[2.0]]), set(&[&[1.0], &[0.0]])).unwrap();
        assert!(sweep_alpha(&p, &p, &[]).is_err());
    }
}
