//! Procedural sprite corpus with controllable conditioning flaws.

pub mod dataset;
pub mod gaussian;
pub mod perturb;
pub mod sprite;

pub use dataset::{
    attribute_vector, conditioning_for, make_dataset, make_grouped_dataset, CondType, Conditioning, Factor,
    GroupLayout, PairedDataset, ATTRIBUTE_LEN,
};
pub use gaussian::{sample_gaussian, sample_gaussian_2d};
pub use perturb::{
    apply_diversity, mean_hamming, perturb_attribute_swap, perturb_noise, perturb_swap, DiversityConfig,
};
pub use sprite::{render_sprite, RenderedSprite, Shape, SpriteSpec, Texture};
