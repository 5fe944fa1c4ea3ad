//! Paired sprite datasets and their conditionings.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FjdError, Result};
use crate::image::{BBox, Image, LabelMap};
use crate::synth::sprite::{
    render_sprite, Shape, SpriteSpec, Texture, ORIENTATION_COUNT, ORIENTATION_STEP, SCALE_GRID,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CondType {
    Class,
    BBox,
    Mask,
    Attributes,
}

impl std::str::FromStr for CondType {
    type Err = FjdError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "class" => Ok(CondType::Class),
            "bbox" => Ok(CondType::BBox),
            "mask" => Ok(CondType::Mask),
            "attributes" => Ok(CondType::Attributes),
            _ => Err(FjdError::InvalidArgument(format!("unknown conditioning type {s:?}"))),
        }
    }
}

impl std::fmt::Display for CondType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            CondType::Class => "class",
            CondType::BBox => "bbox",
            CondType::Mask => "mask",
            CondType::Attributes => "attributes",
        };
        f.write_str(s)
    }
}

/// A generative factor of a sprite.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Factor {
    Shape,
    Scale,
    Orientation,
    XPos,
    YPos,
}

impl std::str::FromStr for Factor {
    type Err = FjdError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shape" => Ok(Factor::Shape),
            "scale" => Ok(Factor::Scale),
            "orientation" => Ok(Factor::Orientation),
            "x_pos" | "x" | "position" => Ok(Factor::XPos),
            "y_pos" | "y" => Ok(Factor::YPos),
            _ => Err(FjdError::InvalidArgument(format!("unknown factor {s:?}"))),
        }
    }
}

impl Factor {
    pub fn value(self, spec: &SpriteSpec) -> f64 {
        match self {
            Factor::Shape => spec.shape.index() as f64,
            Factor::Scale => spec.scale,
            Factor::Orientation => spec.orientation,
            Factor::XPos => spec.x_pos as f64,
            Factor::YPos => spec.y_pos as f64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Conditioning {
    Class(usize),
    BBox { bbox: BBox, class: usize },
    Mask(LabelMap),
    Attributes(Vec<u8>),
}

/// Aligned images, conditionings and ground-truth factors.
#[derive(Clone, Debug, PartialEq)]
pub struct PairedDataset {
    pub images: Vec<Image>,
    pub conds: Vec<Conditioning>,
    pub specs: Vec<SpriteSpec>,
    pub cond_type: CondType,
    pub seed: u64,
}

impl PairedDataset {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Renders `specs` and derives each conditioning from its own spec.
    pub fn from_specs(specs: Vec<SpriteSpec>, cond_type: CondType, seed: u64) -> Result<Self> {
        let rendered = specs
            .par_iter()
            .map(|s| {
                let r = render_sprite(s)?;
                let cond = conditioning_from(s, &r.mask, &r.bbox, cond_type);
                Ok((r.image, cond))
            })
            .collect::<Result<Vec<_>>>()?;
        let (images, conds) = rendered.into_iter().unzip();
        Ok(Self {
            images,
            conds,
            specs,
            cond_type,
            seed,
        })
    }
}

/// Bins per factor in the attribute vector: shape, texture, scale,
/// orientation, x, y.
pub const ATTRIBUTE_BINS: [usize; 6] = [3, 3, 6, 8, 4, 4];
pub const ATTRIBUTE_LEN: usize = 28;

/// Binary attribute vector: one-hot bins for every factor.
pub fn attribute_vector(spec: &SpriteSpec) -> Vec<u8> {
    let (lo, hi) = SpriteSpec::position_range(SCALE_GRID[0]);
    let pos_bin = |p: i32| {
        let t = (p - lo) as f64 / (hi - lo + 1) as f64;
        ((t * 4.0).floor() as usize).min(3)
    };
    let bins = [
        spec.shape.index(),
        spec.texture.index(),
        scale_index(spec.scale),
        ((spec.orientation / 45.0).floor() as usize).min(7),
        pos_bin(spec.x_pos),
        pos_bin(spec.y_pos),
    ];
    let mut v = Vec::with_capacity(ATTRIBUTE_LEN);
    for (b, k) in bins.iter().zip(ATTRIBUTE_BINS) {
        v.extend((0..k).map(|i| u8::from(i == *b)));
    }
    v
}

/// Index of the nearest grid scale.
pub fn scale_index(scale: f64) -> usize {
    SCALE_GRID
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - scale).abs().total_cmp(&(b.1 - scale).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

pub fn conditioning_from(spec: &SpriteSpec, mask: &LabelMap, bbox: &BBox, cond_type: CondType) -> Conditioning {
    match cond_type {
        CondType::Class => Conditioning::Class(spec.shape.index()),
        CondType::BBox => Conditioning::BBox {
            bbox: *bbox,
            class: spec.shape.index(),
        },
        CondType::Mask => Conditioning::Mask(mask.clone()),
        CondType::Attributes => Conditioning::Attributes(attribute_vector(spec)),
    }
}

/// Recomputes the conditioning a spec should carry.
pub fn conditioning_for(spec: &SpriteSpec, cond_type: CondType) -> Result<Conditioning> {
    let r = render_sprite(spec)?;
    Ok(conditioning_from(spec, &r.mask, &r.bbox, cond_type))
}

/// Per-row generator: the output of row `i` depends only on `(seed, i)`.
pub fn row_rng(seed: u64, row: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix64(seed ^ mix64(row.wrapping_add(0x9E37_79B9_7F4A_7C15))))
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn random_texture(rng: &mut ChaCha8Rng) -> Texture {
    Texture::ALL[rng.random_range(0..Texture::ALL.len())]
}

fn random_spec(rng: &mut ChaCha8Rng) -> SpriteSpec {
    let shape = Shape::ALL[rng.random_range(0..Shape::ALL.len())];
    let scale = SCALE_GRID[rng.random_range(0..SCALE_GRID.len())];
    let orientation = rng.random_range(0..ORIENTATION_COUNT) as f64 * ORIENTATION_STEP;
    let (lo, hi) = SpriteSpec::position_range(scale);
    SpriteSpec {
        shape,
        scale,
        orientation,
        x_pos: rng.random_range(lo..=hi),
        y_pos: rng.random_range(lo..=hi),
        texture: random_texture(rng),
    }
}

/// `n` sprites with factors drawn uniformly from the generator grid.
pub fn make_dataset(n: usize, cond_type: CondType, seed: u64) -> Result<PairedDataset> {
    if n == 0 {
        return Err(FjdError::InvalidArgument("dataset size must be at least 1".into()));
    }
    let specs = (0..n as u64)
        .into_par_iter()
        .map(|i| random_spec(&mut row_rng(seed, i)))
        .collect();
    PairedDataset::from_specs(specs, cond_type, seed)
}

/// Structure of a swap corpus: consecutive rows share every factor except
/// `attribute`, which steps through `group_size` neighbouring grid values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupLayout {
    pub attribute: Factor,
    pub group_size: usize,
    /// Restrict every sprite to one shape.
    pub shape: Option<Shape>,
}

impl GroupLayout {
    /// Smallest group that holds pairs at every offset in `1..=max_steps`
    /// grid steps while leaving at least 40% of rows swappable.
    pub fn for_steps(attribute: Factor, max_steps: usize, shape: Option<Shape>) -> Self {
        let group_size = match attribute {
            Factor::Orientation => ORIENTATION_COUNT,
            _ => max_steps + 1,
        };
        Self {
            attribute,
            group_size,
            shape,
        }
    }

    fn validate(&self) -> Result<()> {
        let max = match self.attribute {
            Factor::Scale => SCALE_GRID.len(),
            Factor::Orientation => ORIENTATION_COUNT,
            Factor::XPos | Factor::YPos => {
                let (lo, hi) = SpriteSpec::position_range(SCALE_GRID[SCALE_GRID.len() - 1]);
                (hi - lo + 1) as usize
            }
            Factor::Shape => {
                return Err(FjdError::InvalidArgument("cannot group by shape".into()));
            }
        };
        if self.group_size == 0 || self.group_size > max {
            return Err(FjdError::InvalidArgument(format!(
                "group size {} outside 1..={max} for {:?}",
                self.group_size, self.attribute
            )));
        }
        Ok(())
    }
}

fn group_specs(layout: &GroupLayout, rng: &mut ChaCha8Rng) -> Vec<SpriteSpec> {
    let g = layout.group_size;
    let mut base = random_spec(rng);
    if let Some(shape) = layout.shape {
        base.shape = shape;
    }
    match layout.attribute {
        Factor::XPos | Factor::YPos => {
            let (lo, hi) = SpriteSpec::position_range(base.scale);
            let start = rng.random_range(lo..=hi - (g as i32 - 1));
            (0..g)
                .map(|k| {
                    let mut s = base;
                    if layout.attribute == Factor::XPos {
                        s.x_pos = start + k as i32;
                    } else {
                        s.y_pos = start + k as i32;
                    }
                    s
                })
                .collect()
        }
        Factor::Scale => {
            let first = rng.random_range(0..=SCALE_GRID.len() - g);
            let largest = SCALE_GRID[first + g - 1];
            let (lo, hi) = SpriteSpec::position_range(largest);
            base.x_pos = rng.random_range(lo..=hi);
            base.y_pos = rng.random_range(lo..=hi);
            (0..g)
                .map(|k| SpriteSpec {
                    scale: SCALE_GRID[first + k],
                    ..base
                })
                .collect()
        }
        Factor::Orientation => {
            let first = rng.random_range(0..ORIENTATION_COUNT);
            (0..g)
                .map(|k| SpriteSpec {
                    orientation: ((first + k) % ORIENTATION_COUNT) as f64 * ORIENTATION_STEP,
                    ..base
                })
                .collect()
        }
        Factor::Shape => unreachable!("rejected by GroupLayout::validate"),
    }
}

/// A corpus in which conditioning swaps at small offsets of one factor are
/// always available. Textures are drawn independently per row.
pub fn make_grouped_dataset(n: usize, cond_type: CondType, layout: &GroupLayout, seed: u64) -> Result<PairedDataset> {
    if n == 0 {
        return Err(FjdError::InvalidArgument("dataset size must be at least 1".into()));
    }
    layout.validate()?;
    let groups = n.div_ceil(layout.group_size);
    let mut specs: Vec<SpriteSpec> = (0..groups as u64)
        .into_par_iter()
        .flat_map_iter(|g| group_specs(layout, &mut row_rng(seed, g)))
        .collect();
    specs.truncate(n);
    for (i, s) in specs.iter_mut().enumerate() {
        s.texture = random_texture(&mut row_rng(mix64(seed), i as u64));
    }
    PairedDataset::from_specs(specs, cond_type, seed)
}
