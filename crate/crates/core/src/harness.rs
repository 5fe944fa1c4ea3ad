//! End-to-end sensitivity experiments: build a reference corpus, derive a
//! generated corpus per sweep value, and tabulate FID and FJD.

use serde::{Deserialize, Serialize};

use crate::embedders::{bbox_geometric, flatten_pixels, one_hot, pca_fit, PcaModel, MASK_LATENT_DIM};
use crate::embedding::EmbeddingSet;
use crate::error::{FjdError, Result};
use crate::frechet::{frechet_distance, FrechetResult, GaussianStats, Parallelism};
use crate::joint::{AlphaMode, JointConfig, JointEvaluator, PairedEmbeddings, ScoreMetadata};
use crate::linalg::SquareMatrix;
use crate::synth::dataset::{
    make_dataset, make_grouped_dataset, mix64, CondType, Conditioning, Factor, GroupLayout, PairedDataset,
    ATTRIBUTE_LEN,
};
use crate::synth::gaussian::sample_gaussian;
use crate::synth::perturb::{apply_diversity, perturb_attribute_swap, perturb_noise, perturb_swap, DiversityConfig};
use crate::synth::sprite::{Shape, CANVAS};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_SAMPLES: usize = 10_000;
pub const FAST_SAMPLES: usize = 2_000;
pub const MIN_SAMPLES: usize = 100;
pub const DEFAULT_SWAP_FRACTION: f64 = 0.3;
pub const IMAGE_LATENT_DIM: usize = 64;
/// Embedders are fitted on at most this many leading reference rows.
pub const EMBEDDER_FIT_ROWS: usize = 2_000;
pub const SHAPE_CLASSES: usize = 3;

/// The two joint Gaussians of the closed-form demo, coordinates `(x, y)`
/// with `x` playing the conditioning and `y` the image.
pub const DEMO_COV_1: [[f64; 2]; 2] = [[4.0, 2.0], [2.0, 2.0]];
pub const DEMO_COV_2: [[f64; 2]; 2] = [[2.1, 2.0], [2.0, 2.0]];

pub const NOISE_SIGMAS: [f64; 6] = [0.0, 0.05, 0.1, 0.15, 0.2, 0.25];
pub const PIXEL_OFFSETS: [f64; 4] = [1.0, 2.0, 3.0, 4.0];
pub const DIVERSITY_SCORES: [f64; 5] = [1.0, 0.75, 0.5, 0.25, 0.0];
pub const HAMMING_TARGETS: [f64; 4] = [0.0, 2.0, 4.0, 8.0];
pub const ALPHA_GRID: [f64; 6] = [0.0, 0.5, 1.0, 2.0, 4.0, 8.0];

/// Orientation offsets `15, 30, ..., 180` degrees.
pub fn orientation_offsets() -> Vec<f64> {
    (1..=12).map(|k| 15.0 * k as f64).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Sweep: pixel noise sigma.
    Noise,
    /// Sweep: swap offset in pixels, or degrees for orientation.
    Consistency { attribute: Factor },
    /// Sweep: diversity score.
    Diversity { stratify_by: Factor },
    /// Sweep: alpha, on the closed-form Gaussian pair.
    AlphaSweep,
    /// Single row; `exact` uses the analytic parameters instead of samples.
    GaussianDemo { exact: bool },
    /// Sweep: target mean Hamming distance.
    Hamming,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub cond_type: CondType,
    pub sweep: Vec<f64>,
    pub n_samples: usize,
    pub seed: u64,
    pub joint: JointConfig,
    pub swap_fraction: f64,
    /// Restricts the sprite corpus to one shape.
    pub shape: Option<Shape>,
    pub parallelism: Parallelism,
}

impl ExperimentConfig {
    /// Defaults for `kind`: full-size corpus, the standard sweep grid and
    /// auto-calibrated alpha.
    pub fn new(kind: ExperimentKind, cond_type: CondType) -> Self {
        let sweep = match kind {
            ExperimentKind::Noise => NOISE_SIGMAS.to_vec(),
            ExperimentKind::Consistency {
                attribute: Factor::Orientation,
            } => orientation_offsets(),
            ExperimentKind::Consistency { .. } => PIXEL_OFFSETS.to_vec(),
            ExperimentKind::Diversity { .. } => DIVERSITY_SCORES.to_vec(),
            ExperimentKind::AlphaSweep => ALPHA_GRID.to_vec(),
            ExperimentKind::GaussianDemo { .. } => vec![1.0],
            ExperimentKind::Hamming => HAMMING_TARGETS.to_vec(),
        };
        let joint = match kind {
            ExperimentKind::AlphaSweep | ExperimentKind::GaussianDemo { .. } => {
                JointConfig::fixed(1.0, "identity-y", "identity-x", "gaussian-dist1").expect("valid alpha")
            }
            _ => JointConfig::auto("", "", ""),
        };
        Self {
            kind,
            cond_type,
            sweep,
            n_samples: DEFAULT_SAMPLES,
            seed: 0,
            joint,
            swap_fraction: DEFAULT_SWAP_FRACTION,
            shape: None,
            parallelism: Parallelism::Sequential,
        }
    }

    pub fn fast(mut self) -> Self {
        self.n_samples = FAST_SAMPLES;
        self
    }

    pub fn with_samples(mut self, n: usize) -> Self {
        self.n_samples = n;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_sweep(mut self, sweep: Vec<f64>) -> Self {
        self.sweep = sweep;
        self
    }

    pub fn with_shape(mut self, shape: Shape) -> Self {
        self.shape = Some(shape);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(FjdError::InvalidArgument(m));
        if self.sweep.is_empty() {
            return bad("sweep is empty".into());
        }
        if self.sweep.iter().any(|v| !v.is_finite()) {
            return bad("sweep values must be finite".into());
        }
        let ascending = self.sweep.windows(2).all(|w| w[0] < w[1]);
        let descending = self.sweep.windows(2).all(|w| w[0] > w[1]);
        if !(ascending || descending) {
            return bad("sweep must be strictly monotone".into());
        }
        if self.n_samples < MIN_SAMPLES {
            return bad(format!("n_samples must be at least {MIN_SAMPLES}"));
        }
        if !(0.0..=1.0).contains(&self.swap_fraction) {
            return bad(format!("swap fraction {} outside [0, 1]", self.swap_fraction));
        }
        match self.kind {
            ExperimentKind::Hamming if self.cond_type != CondType::Attributes => {
                bad("the hamming experiment needs attribute conditioning".into())
            }
            ExperimentKind::Consistency {
                attribute: Factor::Shape,
            } => bad("consistency swaps are defined for scale, orientation and positions".into()),
            _ => Ok(()),
        }
    }

    fn is_gaussian(&self) -> bool {
        matches!(
            self.kind,
            ExperimentKind::AlphaSweep | ExperimentKind::GaussianDemo { .. }
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub sweep_value: f64,
    pub fid: f64,
    pub fjd: f64,
    pub alpha: f64,
    pub clamped_count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub schema_version: u32,
    /// Echo of the run configuration, with alpha and embedder ids resolved.
    pub config: ExperimentConfig,
    pub metadata: ScoreMetadata,
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn fid_column(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.fid).collect()
    }

    pub fn fjd_column(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.fjd).collect()
    }
}

/// Image and conditioning embedders fitted on a reference corpus and then
/// frozen.
#[derive(Clone, Debug)]
pub struct EmbeddingPipeline {
    pub cond_type: CondType,
    pub image: PcaModel,
    /// Present for mask conditioning only.
    pub mask: Option<PcaModel>,
}

fn pixel_matrix(ds: &PairedDataset, limit: usize) -> Result<EmbeddingSet> {
    let rows = ds
        .images
        .iter()
        .take(limit)
        .map(flatten_pixels)
        .collect::<Result<Vec<_>>>()?;
    EmbeddingSet::from_rows(&rows)
}

fn mask_matrix(ds: &PairedDataset, limit: usize) -> Result<EmbeddingSet> {
    let rows = ds
        .conds
        .iter()
        .take(limit)
        .map(|c| match c {
            Conditioning::Mask(m) => Ok(m.to_f64()),
            other => Err(FjdError::InvalidArgument(format!(
                "expected a mask conditioning, got {other:?}"
            ))),
        })
        .collect::<Result<Vec<_>>>()?;
    EmbeddingSet::from_rows(&rows)
}

impl EmbeddingPipeline {
    pub fn fit(reference: &PairedDataset) -> Result<Self> {
        let limit = EMBEDDER_FIT_ROWS.min(reference.len());
        let latent = |m: usize| m.min(limit - 1);
        let image = pca_fit(&pixel_matrix(reference, limit)?, latent(IMAGE_LATENT_DIM))?;
        let mask = match reference.cond_type {
            CondType::Mask => Some(pca_fit(&mask_matrix(reference, limit)?, latent(MASK_LATENT_DIM))?),
            _ => None,
        };
        Ok(Self {
            cond_type: reference.cond_type,
            image,
            mask,
        })
    }

    pub fn image_id(&self) -> String {
        format!("pca{}-pixels{}x{}", self.image.latent_dim, CANVAS, CANVAS)
    }

    pub fn cond_id(&self) -> String {
        match self.cond_type {
            CondType::Class => format!("onehot{SHAPE_CLASSES}"),
            CondType::BBox => format!("bbox-geometric+onehot{SHAPE_CLASSES}"),
            CondType::Mask => format!(
                "pca{}-mask{}x{}",
                self.mask.as_ref().map_or(0, |m| m.latent_dim),
                CANVAS,
                CANVAS
            ),
            CondType::Attributes => format!("attributes{ATTRIBUTE_LEN}"),
        }
    }

    pub fn embed_images(&self, ds: &PairedDataset) -> Result<EmbeddingSet> {
        self.image.encode_set(&pixel_matrix(ds, ds.len())?)
    }

    pub fn embed_conds(&self, ds: &PairedDataset) -> Result<EmbeddingSet> {
        if let Some(model) = &self.mask {
            return model.encode_set(&mask_matrix(ds, ds.len())?);
        }
        let rows = ds
            .conds
            .iter()
            .map(|c| match (self.cond_type, c) {
                (CondType::Class, Conditioning::Class(k)) => one_hot(*k, SHAPE_CLASSES),
                (CondType::BBox, Conditioning::BBox { bbox, class }) => bbox_geometric(bbox, *class, SHAPE_CLASSES),
                (CondType::Attributes, Conditioning::Attributes(v)) => Ok(v.iter().map(|&b| b as f64).collect()),
                (ct, other) => Err(FjdError::InvalidArgument(format!(
                    "conditioning {other:?} does not match type {ct}"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        EmbeddingSet::from_rows(&rows)
    }

    pub fn embed(&self, ds: &PairedDataset) -> Result<PairedEmbeddings> {
        PairedEmbeddings::new(self.embed_images(ds)?, self.embed_conds(ds)?)
    }
}

fn reference_id(cfg: &ExperimentConfig, seed: u64) -> String {
    format!("synth:{}:n{}:seed{}", cfg.cond_type, cfg.n_samples, seed)
}

/// Grid steps needed to realize the largest offset in `sweep`.
pub fn swap_steps(attribute: Factor, sweep: &[f64]) -> usize {
    let max = sweep.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    match attribute {
        Factor::Scale => (max / 0.1).round() as usize,
        _ => max.round() as usize,
    }
}

/// The unperturbed corpus an experiment compares against.
pub fn build_reference(cfg: &ExperimentConfig, seed: u64) -> Result<PairedDataset> {
    match cfg.kind {
        ExperimentKind::Consistency { attribute } => {
            let layout = GroupLayout::for_steps(attribute, swap_steps(attribute, &cfg.sweep).max(1), cfg.shape);
            make_grouped_dataset(cfg.n_samples, cfg.cond_type, &layout, seed)
        }
        _ => {
            let ds = make_dataset(cfg.n_samples, cfg.cond_type, seed)?;
            match cfg.shape {
                None => Ok(ds),
                Some(_) => Err(FjdError::InvalidArgument(
                    "a shape restriction applies to consistency corpora only".into(),
                )),
            }
        }
    }
}

/// Generated corpus for one sweep value.
pub fn perturb_for(cfg: &ExperimentConfig, reference: &PairedDataset, value: f64) -> Result<PairedDataset> {
    let pseed = mix64(cfg.seed ^ 0x005E_ED0F_0E27);
    match cfg.kind {
        ExperimentKind::Noise => perturb_noise(reference, value, pseed),
        ExperimentKind::Consistency { attribute } => perturb_swap(reference, attribute, value, cfg.swap_fraction),
        ExperimentKind::Diversity { stratify_by } => {
            apply_diversity(reference, &DiversityConfig::new(stratify_by, value), pseed)
        }
        ExperimentKind::Hamming => perturb_attribute_swap(reference, value, pseed),
        ExperimentKind::AlphaSweep | ExperimentKind::GaussianDemo { .. } => Err(FjdError::InvalidArgument(
            "gaussian experiments have no sprite corpus".into(),
        )),
    }
}

fn demo_stats() -> Result<(GaussianStats, GaussianStats)> {
    // stored as (y, x): image block first, conditioning last
    let reorder = |c: [[f64; 2]; 2]| [[c[1][1], c[1][0]], [c[0][1], c[0][0]]];
    let a = GaussianStats::analytic(vec![0.0, 0.0], SquareMatrix::from_rows(&reorder(DEMO_COV_1))?)?;
    let b = GaussianStats::analytic(vec![0.0, 0.0], SquareMatrix::from_rows(&reorder(DEMO_COV_2))?)?;
    Ok((a, b))
}

/// The closed-form pair as `(dist1, dist2)`, image coordinate first.
pub fn demo_gaussians() -> Result<(GaussianStats, GaussianStats)> {
    demo_stats()
}

fn demo_samples(n: usize, seed: u64) -> Result<(PairedEmbeddings, PairedEmbeddings)> {
    let (a, b) = demo_stats()?;
    let split = |set: EmbeddingSet| -> Result<PairedEmbeddings> {
        PairedEmbeddings::new(set.select_cols(&[0]), set.select_cols(&[1]))
    };
    Ok((
        split(sample_gaussian(&a.mean, &a.cov, n, mix64(seed))?)?,
        split(sample_gaussian(&b.mean, &b.cov, n, mix64(seed ^ 1))?)?,
    ))
}

fn row(sweep_value: f64, alpha: f64, fid: &FrechetResult, fjd: &FrechetResult) -> ResultRow {
    ResultRow {
        sweep_value,
        fid: fid.value,
        fjd: fjd.value,
        alpha,
        clamped_count: fid.clamped_eigenvalues + fjd.clamped_eigenvalues,
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultTable> {
    run_experiment_streaming(cfg, |_| Ok(()))
}

/// Runs `cfg`, handing the table to `flush` after every completed row so a
/// failure later in the sweep leaves the finished rows persisted.
pub fn run_experiment_streaming<F>(cfg: &ExperimentConfig, mut flush: F) -> Result<ResultTable>
where
    F: FnMut(&ResultTable) -> Result<()>,
{
    cfg.validate()?;
    if cfg.is_gaussian() {
        return run_gaussian(cfg, flush);
    }
    let reference = build_reference(cfg, cfg.seed)?;
    let pipeline = EmbeddingPipeline::fit(&reference)?;
    let ref_emb = pipeline.embed(&reference)?;
    let mut joint = cfg.joint.clone();
    joint.image_embedder_id = pipeline.image_id();
    joint.cond_embedder_id = pipeline.cond_id();
    joint.reference_id = reference_id(cfg, cfg.seed);
    let evaluator = JointEvaluator::new(&ref_emb, &joint, cfg.parallelism)?;
    let resolved = evaluator.config().clone();

    let mut table = ResultTable {
        schema_version: SCHEMA_VERSION,
        config: ExperimentConfig {
            joint: resolved.clone(),
            ..cfg.clone()
        },
        metadata: resolved.metadata(Some(cfg.seed)),
        rows: Vec::with_capacity(cfg.sweep.len()),
    };
    for &value in &cfg.sweep {
        let generated = perturb_for(cfg, &reference, value)?;
        let (fid, fjd) = evaluator.score(&pipeline.embed(&generated)?)?;
        table.rows.push(row(value, evaluator.alpha(), &fid, &fjd));
        flush(&table)?;
    }
    Ok(table)
}

fn run_gaussian<F>(cfg: &ExperimentConfig, mut flush: F) -> Result<ResultTable>
where
    F: FnMut(&ResultTable) -> Result<()>,
{
    let exact = match cfg.kind {
        ExperimentKind::GaussianDemo { exact } => exact,
        _ => true,
    };
    let (a, b) = if exact {
        demo_stats()?
    } else {
        let (ra, rb) = demo_samples(cfg.n_samples, cfg.seed)?;
        let stats = |p: &PairedEmbeddings| crate::frechet::estimate_gaussian_with(&p.merged(1.0), cfg.parallelism);
        (stats(&ra)?, stats(&rb)?)
    };
    let fid = frechet_distance(&a.marginal(&[0]), &b.marginal(&[0]))?;
    let alphas: Vec<f64> = match cfg.kind {
        ExperimentKind::AlphaSweep => cfg.sweep.clone(),
        _ => vec![cfg.joint.alpha],
    };
    let mut joint = cfg.joint.clone();
    if joint.alpha_mode == AlphaMode::Auto {
        return Err(FjdError::InvalidArgument(
            "gaussian experiments use a fixed alpha".into(),
        ));
    }
    joint.reference_id = if exact {
        "gaussian-dist1:exact".into()
    } else {
        format!("gaussian-dist1:n{}:seed{}", cfg.n_samples, cfg.seed)
    };
    let mut table = ResultTable {
        schema_version: SCHEMA_VERSION,
        config: ExperimentConfig {
            joint: joint.clone(),
            ..cfg.clone()
        },
        metadata: joint.metadata(Some(cfg.seed)),
        rows: Vec::with_capacity(alphas.len()),
    };
    for (i, &alpha) in alphas.iter().enumerate() {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(FjdError::InvalidArgument(format!("invalid alpha {alpha}")));
        }
        let fjd = frechet_distance(&a.scale_tail(1, alpha), &b.scale_tail(1, alpha))?;
        let sweep_value = match cfg.kind {
            ExperimentKind::AlphaSweep => cfg.sweep[i],
            _ => cfg.sweep[0],
        };
        table.rows.push(row(sweep_value, alpha, &fid, &fjd));
        flush(&table)?;
    }
    Ok(table)
}

/// Same-distribution sampling floor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlFloor {
    pub fid: f64,
    pub fjd: f64,
}

impl ControlFloor {
    /// The larger of the two, used as the tolerance for either metric.
    pub fn value(&self) -> f64 {
        self.fid.max(self.fjd)
    }
}

/// FID and FJD between two disjoint samples of the reference distribution
/// of `cfg`, each of size `n_samples`, drawn with seeds derived from
/// `cfg.seed`.
pub fn control_floor(cfg: &ExperimentConfig) -> Result<ControlFloor> {
    control_floor_with_seeds(cfg, mix64(cfg.seed ^ 0xC0), mix64(cfg.seed ^ 0xC1))
}

pub fn control_floor_with_seeds(cfg: &ExperimentConfig, seed_a: u64, seed_b: u64) -> Result<ControlFloor> {
    cfg.validate()?;
    if seed_a == seed_b {
        return Err(FjdError::SamplesNotDisjoint(seed_a));
    }
    if cfg.is_gaussian() {
        if matches!(cfg.kind, ExperimentKind::GaussianDemo { exact: true }) {
            return Ok(ControlFloor { fid: 0.0, fjd: 0.0 });
        }
        let (a, _) = demo_samples(cfg.n_samples, seed_a)?;
        let (b, _) = demo_samples(cfg.n_samples, seed_b)?;
        let joint = cfg.joint.clone();
        let eval = JointEvaluator::new(&a, &joint, cfg.parallelism)?;
        let (fid, fjd) = eval.score(&b)?;
        return Ok(ControlFloor {
            fid: fid.value,
            fjd: fjd.value,
        });
    }
    let first = build_reference(cfg, seed_a)?;
    let second = build_reference(cfg, seed_b)?;
    let pipeline = EmbeddingPipeline::fit(&first)?;
    let eval = JointEvaluator::new(&pipeline.embed(&first)?, &cfg.joint, cfg.parallelism)?;
    let (fid, fjd) = eval.score(&pipeline.embed(&second)?)?;
    Ok(ControlFloor {
        fid: fid.value,
        fjd: fjd.value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_demo_matches_closed_form() {
        let cfg = ExperimentConfig::new(ExperimentKind::GaussianDemo { exact: true }, CondType::Class);
        let t = run_experiment(&cfg).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.rows[0].fid, 0.0);
        // 10.1 - 2 sqrt(20.4 + 2 sqrt(0.8))
        let oracle = 10.1 - 2.0 * (20.4 + 2.0 * 0.8_f64.sqrt()).sqrt();
        assert!((t.rows[0].fjd - oracle).abs() < 1e-10);
        assert_eq!(t.metadata.alpha_6dp, "1.000000");
    }

    #[test]
    fn alpha_sweep_starts_at_fid() {
        let cfg = ExperimentConfig::new(ExperimentKind::AlphaSweep, CondType::Class);
        let t = run_experiment(&cfg).unwrap();
        assert_eq!(t.rows.len(), ALPHA_GRID.len());
        assert!(t.rows[0].fjd.abs() < 1e-12);
        assert!(t.rows.windows(2).all(|w| w[1].fjd >= w[0].fjd));
    }

    #[test]
    fn validation() {
        let base = ExperimentConfig::new(ExperimentKind::Noise, CondType::Class);
        assert!(base.clone().with_sweep(vec![]).validate().is_err());
        assert!(base.clone().with_sweep(vec![0.1, 0.0, 0.2]).validate().is_err());
        assert!(base.clone().with_samples(10).validate().is_err());
        assert!(ExperimentConfig::new(ExperimentKind::Hamming, CondType::Class)
            .validate()
            .is_err());
        assert!(ExperimentConfig::new(
            ExperimentKind::Diversity {
                stratify_by: Factor::Shape
            },
            CondType::Class
        )
        .validate()
        .is_ok());
    }

    #[test]
    fn control_floor_guards() {
        let cfg = ExperimentConfig::new(ExperimentKind::GaussianDemo { exact: true }, CondType::Class);
        assert_eq!(control_floor(&cfg).unwrap().value(), 0.0);
        assert!(matches!(
            control_floor_with_seeds(&cfg, 4, 4),
            Err(FjdError::SamplesNotDisjoint(4))
        ));
    }

    #[test]
    fn streaming_flushes_each_row() {
        let cfg = ExperimentConfig::new(ExperimentKind::Noise, CondType::Class)
            .with_samples(150)
            .with_sweep(vec![0.0, 0.1]);
        let mut seen = Vec::new();
        let t = run_experiment_streaming(&cfg, |t| {
            seen.push(t.rows.len());
            Ok(())
        })
        .unwrap();
        assert_eq!(seen, vec![1, 2]);
        assert_eq!(t.rows[0].fid, 0.0);
        assert!(t.metadata.image_embedder_id.starts_with("pca"));
    }

    #[test]
    fn partial_rows_survive_a_failing_sweep_point() {
        let cfg = ExperimentConfig::new(
            ExperimentKind::Consistency {
                attribute: Factor::XPos,
            },
            CondType::BBox,
        )
        .with_samples(120)
        .with_sweep(vec![1.0, 2.0, 3.0]);
        let cfg = ExperimentConfig {
            swap_fraction: 0.6,
            ..cfg
        };
        let mut last = 0;
        let err = run_experiment_streaming(&cfg, |t| {
            last = t.rows.len();
            Ok(())
        });
        assert!(err.is_err());
        assert_eq!(last, 2);
    }
}
