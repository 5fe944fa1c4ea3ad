//! Raster containers shared by the sprite generator and the embedders.

use serde::{Deserialize, Serialize};

use crate::error::{FjdError, Result};

/// `H x W x C` image, row-major with interleaved channels, values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width * channels {
            return Err(FjdError::DimensionMismatch {
                expected: height * width * channels,
                got: data.len(),
            });
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self {
            height,
            width,
            channels,
            data: vec![0.0; height * width * channels],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    pub fn set(&mut self, y: usize, x: usize, c: usize, v: f64) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn nonzero_count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0.0).count()
    }
}

/// Integer label raster; 0 is background.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabelMap {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl LabelMap {
    pub fn new(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != height * width {
            return Err(FjdError::DimensionMismatch {
                expected: height * width,
                got: data.len(),
            });
        }
        Ok(Self { height, width, data })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![0; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn get(&self, y: usize, x: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, y: usize, x: usize, v: u8) {
        self.data[y * self.width + x] = v;
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.data
    }

    pub fn area(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| v as f64).collect()
    }
}

/// Axis-aligned box in normalized canvas coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x_center: f64,
    pub y_center: f64,
    pub width: f64,
    pub height: f64,
}

impl BBox {
    pub fn as_array(&self) -> [f64; 4] {
        [self.x_center, self.y_center, self.width, self.height]
    }

    /// Pixel columns/rows `[x0, x1) x [y0, y1)` covered on a `size x size` canvas.
    pub fn pixel_span(&self, size: usize) -> (usize, usize, usize, usize) {
        let s = size as f64;
        let px = |v: f64| (v * s).round().clamp(0.0, s) as usize;
        (
            px(self.x_center - self.width / 2.0),
            px(self.x_center + self.width / 2.0),
            px(self.y_center - self.height / 2.0),
            px(self.y_center + self.height / 2.0),
        )
    }

    /// Filled rectangle carrying `label`.
    pub fn rasterize(&self, size: usize, label: u8) -> LabelMap {
        let (x0, x1, y0, y1) = self.pixel_span(size);
        let mut map = LabelMap::zeros(size, size);
        for y in y0..y1 {
            for x in x0..x1 {
                map.set(y, x, label);
            }
        }
        map
    }
}
