//! Textured 2-D sprites fully described by their generative factors.
//!
//! Rasterization samples each pixel center once (no anti-aliasing), so a
//! spec always renders to the same bits.

use serde::{Deserialize, Serialize};

use crate::error::{FjdError, Result};
use crate::image::{BBox, Image, LabelMap};

pub const CANVAS: usize = 64;
/// Half the side of a square sprite at scale 1.0, in pixels.
pub const HALF_SIDE: f64 = 16.0;
pub const SCALE_MIN: f64 = 0.3;
pub const SCALE_MAX: f64 = 1.0;
/// Scales drawn by the dataset generator.
pub const SCALE_GRID: [f64; 6] = [0.5, 0.6, 0.7, 0.8, 0.9, 1.0];
/// Orientation step of the dataset generator, in degrees.
pub const ORIENTATION_STEP: f64 = 15.0;
pub const ORIENTATION_COUNT: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Square,
    Ellipse,
    Heart,
}

impl Shape {
    pub const ALL: [Shape; 3] = [Shape::Square, Shape::Ellipse, Shape::Heart];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Point-in-shape test in sprite-local coordinates (pixels, y down).
    fn contains(self, u: f64, v: f64, half: f64) -> bool {
        match self {
            Shape::Square => u.abs() <= half && v.abs() <= half,
            Shape::Ellipse => {
                let (a, b) = (half, half * 0.5);
                (u / a).powi(2) + (v / b).powi(2) <= 1.0
            }
            Shape::Heart => {
                // (x^2 + y^2 - 1)^3 - x^2 y^3 <= 0, y pointing up
                let k = half / 1.15;
                let (x, y) = (u / k, -v / k);
                let r = x * x + y * y - 1.0;
                r * r * r - x * x * y * y * y <= 0.0
            }
        }
    }
}

impl std::str::FromStr for Shape {
    type Err = FjdError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "square" => Ok(Shape::Square),
            "ellipse" => Ok(Shape::Ellipse),
            "heart" => Ok(Shape::Heart),
            _ => Err(FjdError::InvalidArgument(format!("unknown shape {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Texture {
    /// 8 px period.
    Checker,
    /// 4 px period at 45 degrees.
    Stripes,
    /// Radius-2 dots on a 6 px grid.
    Dots,
}

impl Texture {
    pub const ALL: [Texture; 3] = [Texture::Checker, Texture::Stripes, Texture::Dots];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Canvas-aligned pattern value at pixel `(x, y)`.
    pub fn is_on(self, x: usize, y: usize) -> bool {
        match self {
            Texture::Checker => (x / 4 + y / 4).is_multiple_of(2),
            Texture::Stripes => (x + y) % 4 < 2,
            Texture::Dots => {
                let (cx, cy) = (x as f64 + 0.5, y as f64 + 0.5);
                let gx = (cx / 6.0).floor() * 6.0 + 3.0;
                let gy = (cy / 6.0).floor() * 6.0 + 3.0;
                (cx - gx).powi(2) + (cy - gy).powi(2) <= 4.0
            }
        }
    }
}

/// Generative factors of one sprite. Position is the sprite center in
/// pixel coordinates; orientation is in degrees.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpriteSpec {
    pub shape: Shape,
    pub scale: f64,
    pub orientation: f64,
    pub x_pos: i32,
    pub y_pos: i32,
    pub texture: Texture,
}

impl SpriteSpec {
    /// Radius of the circle enclosing every shape at `scale`.
    pub fn extent(scale: f64) -> f64 {
        HALF_SIDE * scale * std::f64::consts::SQRT_2
    }

    /// Inclusive range of legal center coordinates at `scale`.
    pub fn position_range(scale: f64) -> (i32, i32) {
        let r = Self::extent(scale).ceil() as i32;
        (r, CANVAS as i32 - r)
    }

    pub fn validate(&self) -> Result<()> {
        if !(SCALE_MIN..=SCALE_MAX).contains(&self.scale) {
            return Err(FjdError::InvalidArgument(format!(
                "scale {} outside [{SCALE_MIN}, {SCALE_MAX}]",
                self.scale
            )));
        }
        if !(0.0..360.0).contains(&self.orientation) {
            return Err(FjdError::InvalidArgument(format!(
                "orientation {} outside [0, 360)",
                self.orientation
            )));
        }
        let (lo, hi) = Self::position_range(self.scale);
        if !(lo..=hi).contains(&self.x_pos) || !(lo..=hi).contains(&self.y_pos) {
            return Err(FjdError::InvalidArgument(format!(
                "position ({}, {}) outside [{lo}, {hi}] for scale {}",
                self.x_pos, self.y_pos, self.scale
            )));
        }
        Ok(())
    }
}

/// Exact values at multiples of 90 degrees so quarter turns map the pixel
/// grid onto itself.
fn cos_sin_deg(deg: f64) -> (f64, f64) {
    let quarter = deg / 90.0;
    if quarter.fract() == 0.0 {
        match (quarter as i64).rem_euclid(4) {
            0 => (1.0, 0.0),
            1 => (0.0, 1.0),
            2 => (-1.0, 0.0),
            _ => (0.0, -1.0),
        }
    } else {
        let r = deg.to_radians();
        (r.cos(), r.sin())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RenderedSprite {
    pub image: Image,
    pub class_label: usize,
    pub bbox: BBox,
    /// Silhouette labelled `class_label + 1`.
    pub mask: LabelMap,
}

/// Renders the silhouette mask only.
pub fn render_mask(spec: &SpriteSpec) -> Result<LabelMap> {
    spec.validate()?;
    let mut mask = LabelMap::zeros(CANVAS, CANVAS);
    let label = spec.shape.index() as u8 + 1;
    let half = HALF_SIDE * spec.scale;
    let (c, s) = cos_sin_deg(spec.orientation);
    let r = SpriteSpec::extent(spec.scale).ceil() as i32 + 1;
    let (x0, x1) = ((spec.x_pos - r).max(0), (spec.x_pos + r).min(CANVAS as i32));
    let (y0, y1) = ((spec.y_pos - r).max(0), (spec.y_pos + r).min(CANVAS as i32));
    for py in y0..y1 {
        for px in x0..x1 {
            let dx = px as f64 + 0.5 - spec.x_pos as f64;
            let dy = py as f64 + 0.5 - spec.y_pos as f64;
            // rotate by -orientation into the sprite frame
            let u = dx * c + dy * s;
            let v = -dx * s + dy * c;
            if spec.shape.contains(u, v, half) {
                mask.set(py as usize, px as usize, label);
            }
        }
    }
    Ok(mask)
}

/// Tight pixel box of a mask, normalized by the canvas size.
pub fn mask_bbox(mask: &LabelMap) -> BBox {
    let (mut x0, mut x1, mut y0, mut y1) = (usize::MAX, 0, usize::MAX, 0);
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if mask.get(y, x) != 0 {
                x0 = x0.min(x);
                x1 = x1.max(x + 1);
                y0 = y0.min(y);
                y1 = y1.max(y + 1);
            }
        }
    }
    if x0 == usize::MAX {
        return BBox {
            x_center: 0.5,
            y_center: 0.5,
            width: 0.0,
            height: 0.0,
        };
    }
    let s = mask.width() as f64;
    BBox {
        x_center: (x0 + x1) as f64 / 2.0 / s,
        y_center: (y0 + y1) as f64 / 2.0 / mask.height() as f64,
        width: (x1 - x0) as f64 / s,
        height: (y1 - y0) as f64 / mask.height() as f64,
    }
}

/// Textured silhouette on a black single-channel canvas.
pub fn texture_image(mask: &LabelMap, texture: Texture) -> Image {
    let mut img = Image::zeros(mask.height(), mask.width(), 1);
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if mask.get(y, x) != 0 && texture.is_on(x, y) {
                img.set(y, x, 0, 1.0);
            }
        }
    }
    img
}

pub fn render_sprite(spec: &SpriteSpec) -> Result<RenderedSprite> {
    let mask = render_mask(spec)?;
    Ok(RenderedSprite {
        image: texture_image(&mask, spec.texture),
        class_label: spec.shape.index(),
        bbox: mask_bbox(&mask),
        mask,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(shape: Shape, orientation: f64) -> SpriteSpec {
        SpriteSpec {
            shape,
            scale: 1.0,
            orientation,
            x_pos: 32,
            y_pos: 32,
            texture: Texture::Checker,
        }
    }

    #[test]
    fn centered_square_bbox() {
        let r = render_sprite(&spec(Shape::Square, 0.0)).unwrap();
        assert_eq!(
            r.bbox,
            BBox {
                x_center: 0.5,
                y_center: 0.5,
                width: 0.5,
                height: 0.5
            }
        );
        assert_eq!(r.mask.area(), 32 * 32);
        assert_eq!(r.class_label, 0);
    }

    #[test]
    fn square_quarter_turn_mask_is_identical() {
        for scale in SCALE_GRID {
            let a = SpriteSpec {
                scale,
                ..spec(Shape::Square, 0.0)
            };
            let b = SpriteSpec {
                scale,
                ..spec(Shape::Square, 90.0)
            };
            assert_eq!(render_mask(&a).unwrap(), render_mask(&b).unwrap());
        }
        let a = render_mask(&spec(Shape::Square, 0.0)).unwrap();
        let c = render_mask(&spec(Shape::Square, 45.0)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn textured_pixels_lie_inside_silhouette() {
        for shape in Shape::ALL {
            for texture in Texture::ALL {
                let s = SpriteSpec {
                    texture,
                    ..spec(shape, 30.0)
                };
                let r = render_sprite(&s).unwrap();
                assert!(r.mask.area() >= r.image.nonzero_count());
                for y in 0..CANVAS {
                    for x in 0..CANVAS {
                        if r.image.get(y, x, 0) != 0.0 {
                            assert_ne!(r.mask.get(y, x), 0);
                        }
                    }
                }
            }
        }
        let dots = render_sprite(&SpriteSpec {
            texture: Texture::Dots,
            ..spec(Shape::Ellipse, 0.0)
        })
        .unwrap();
        assert_ne!(dots.mask.area(), dots.image.nonzero_count());
    }

    #[test]
    fn legal_specs_fit_on_canvas() {
        for shape in Shape::ALL {
            for scale in SCALE_GRID {
                let (lo, hi) = SpriteSpec::position_range(scale);
                for (x, y) in [(lo, lo), (hi, hi), (lo, hi)] {
                    for k in 0..ORIENTATION_COUNT {
                        let s = SpriteSpec {
                            shape,
                            scale,
                            orientation: k as f64 * ORIENTATION_STEP,
                            x_pos: x,
                            y_pos: y,
                            texture: Texture::Dots,
                        };
                        let mask = render_mask(&s).unwrap();
                        // nothing would have been clipped: a canvas twice as large
                        // is not needed when the enclosing circle fits
                        let r = SpriteSpec::extent(scale);
                        assert!(x as f64 - r >= 0.0 && x as f64 + r <= CANVAS as f64);
                        assert!(mask.area() > 0);
                    }
                }
            }
        }
    }

    #[test]
    fn rendering_is_deterministic() {
        let s = spec(Shape::Heart, 105.0);
        assert_eq!(render_sprite(&s).unwrap(), render_sprite(&s).unwrap());
    }

    #[test]
    fn illegal_specs_are_rejected() {
        assert!(render_sprite(&SpriteSpec {
            scale: 1.2,
            ..spec(Shape::Square, 0.0)
        })
        .is_err());
        assert!(render_sprite(&SpriteSpec {
            x_pos: 2,
            ..spec(Shape::Square, 0.0)
        })
        .is_err());
        assert!(render_sprite(&spec(Shape::Square, 360.0)).is_err());
    }
}
