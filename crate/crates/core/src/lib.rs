//! Fréchet Joint Distance (FJD) and FID between sets of embeddings.

pub mod cli;
pub mod embedders;
pub mod embedding;
pub mod error;
pub mod frechet;
pub mod harness;
pub mod image;
pub mod io;
pub mod joint;
pub mod linalg;
pub mod synth;

pub use embedding::EmbeddingSet;
pub use error::{FjdError, Result};
pub use frechet::{estimate_gaussian, frechet_distance, FrechetResult, GaussianStats, MomentAccumulator, Parallelism};
pub use joint::{calibrate_alpha, compute_fid, compute_fjd, AlphaMode, JointConfig, JointEvaluator, PairedEmbeddings};
pub use linalg::SquareMatrix;
