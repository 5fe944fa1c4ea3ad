//! Embedding functions for conditionings (`h`) and images (`f`).
//!
//! The learned autoencoder usually used for box and mask conditionings is
//! replaced here by linear PCA: deterministic, cheap to fit, and sensitive
//! to where a shape sits on the canvas.

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, MatRef, Par};
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingSet;
use crate::error::{FjdError, Result};
use crate::image::{BBox, Image, LabelMap};
use crate::linalg::{sym_eigen, SymEigen};

/// Default PCA latent size for mask label rasters.
pub const MASK_LATENT_DIM: usize = 64;

pub fn one_hot(label: usize, k: usize) -> Result<Vec<f64>> {
    if label >= k {
        return Err(FjdError::LabelOutOfRange { label, k });
    }
    let mut v = vec![0.0; k];
    v[label] = 1.0;
    Ok(v)
}

/// Indicator vector of a label set; duplicates are ignored.
pub fn n_hot(labels: &[usize], k: usize) -> Result<Vec<f64>> {
    let mut v = vec![0.0; k];
    for &label in labels {
        if label >= k {
            return Err(FjdError::LabelOutOfRange { label, k });
        }
        v[label] = 1.0;
    }
    Ok(v)
}

/// Row-major flattening of an image whose values lie in `[0, 1]`.
pub fn flatten_pixels(image: &Image) -> Result<Vec<f64>> {
    if let Some(&bad) = image.as_slice().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(FjdError::InvalidArgument(format!("pixel value {bad} outside [0, 1]")));
    }
    Ok(image.as_slice().to_vec())
}

/// Inverse of [`flatten_pixels`].
pub fn unflatten_pixels(v: &[f64], height: usize, width: usize, channels: usize) -> Result<Image> {
    Image::new(height, width, channels, v.to_vec())
}

/// Normalized box coordinates followed by the one-hot shape class.
pub fn bbox_geometric(bbox: &BBox, shape_class: usize, k: usize) -> Result<Vec<f64>> {
    let coords = bbox.as_array();
    if coords.iter().any(|c| !(0.0..=1.0).contains(c)) || bbox.width <= 0.0 || bbox.height <= 0.0 {
        return Err(FjdError::InvalidArgument(format!(
            "bounding box {coords:?} outside the unit square or empty"
        )));
    }
    let mut v = coords.to_vec();
    v.extend(one_hot(shape_class, k)?);
    Ok(v)
}

/// Linear projection onto the top principal directions of a fitted corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `latent_dim x input_dim`, orthonormal rows, row-major.
    pub basis: Vec<f64>,
    pub latent_dim: usize,
    pub input_dim: usize,
    /// Variance captured by each component, descending.
    pub variances: Vec<f64>,
    pub explained_variance_ratio: f64,
}

impl PcaModel {
    pub fn basis_row(&self, k: usize) -> &[f64] {
        &self.basis[k * self.input_dim..(k + 1) * self.input_dim]
    }

    fn basis_mat(&self) -> MatRef<'_, f64> {
        MatRef::from_row_major_slice(&self.basis, self.latent_dim, self.input_dim)
    }

    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim {
            return Err(FjdError::DimensionMismatch {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        Ok((0..self.latent_dim)
            .map(|k| {
                self.basis_row(k)
                    .iter()
                    .zip(x.iter().zip(&self.mean))
                    .map(|(b, (v, m))| b * (v - m))
                    .sum()
            })
            .collect())
    }

    pub fn decode(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.latent_dim {
            return Err(FjdError::DimensionMismatch {
                expected: self.latent_dim,
                got: z.len(),
            });
        }
        let mut out = self.mean.clone();
        for (k, &zk) in z.iter().enumerate() {
            for (o, b) in out.iter_mut().zip(self.basis_row(k)) {
                *o += zk * b;
            }
        }
        Ok(out)
    }

    /// Encodes every row of `set` with one matrix product.
    pub fn encode_set(&self, set: &EmbeddingSet) -> Result<EmbeddingSet> {
        if set.cols() != self.input_dim {
            return Err(FjdError::DimensionMismatch {
                expected: self.input_dim,
                got: set.cols(),
            });
        }
        let n = set.rows();
        let x = set.as_mat();
        let centered = Mat::<f64>::from_fn(n, self.input_dim, |i, j| x[(i, j)] - self.mean[j]);
        let mut z = Mat::<f64>::zeros(n, self.latent_dim);
        matmul(
            z.as_mut(),
            Accum::Replace,
            centered.as_ref(),
            self.basis_mat().transpose(),
            1.0,
            Par::Seq,
        );
        let data = (0..n)
            .flat_map(|i| (0..self.latent_dim).map(move |k| (i, k)))
            .map(|(i, k)| z[(i, k)])
            .collect();
        EmbeddingSet::new(n, self.latent_dim, data)
    }
}

/// Fits a `latent_dim`-component PCA to the rows of `data`.
///
/// Eigendecomposes the `D x D` covariance when `D <= N`, otherwise the
/// `N x N` Gram matrix of centered rows. Each basis row is sign-normalized
/// so that its largest-magnitude entry is positive.
pub fn pca_fit(data: &EmbeddingSet, latent_dim: usize) -> Result<PcaModel> {
    let (n, d) = (data.rows(), data.cols());
    if n < 2 {
        return Err(FjdError::InsufficientSamples { needed: 2, got: n });
    }
    let max = (n - 1).min(d);
    if latent_dim == 0 || latent_dim > max {
        return Err(FjdError::LatentDimTooLarge {
            requested: latent_dim,
            max,
        });
    }
    data.check_finite()?;

    let x = data.as_mat();
    let mut mean = vec![0.0; d];
    for r in data.iter_rows() {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered = Mat::<f64>::from_fn(n, d, |i, j| x[(i, j)] - mean[j]);
    let denom = (n - 1) as f64;
    let total_variance: f64 = (0..d)
        .map(|j| (0..n).map(|i| centered[(i, j)].powi(2)).sum::<f64>())
        .sum::<f64>()
        / denom;

    let mut basis = vec![0.0; latent_dim * d];
    let mut variances = Vec::with_capacity(latent_dim);
    if d <= n {
        let mut cov = Mat::<f64>::zeros(d, d);
        matmul(
            cov.as_mut(),
            Accum::Replace,
            centered.transpose(),
            centered.as_ref(),
            1.0 / denom,
            Par::Seq,
        );
        let eig = sym_eigen(cov.as_ref())?;
        for k in 0..latent_dim {
            let col = d - 1 - k;
            variances.push(eig.values[col].max(0.0));
            for j in 0..d {
                basis[k * d + j] = eig.vectors[(j, col)];
            }
        }
    } else {
        let mut gram = Mat::<f64>::zeros(n, n);
        matmul(
            gram.as_mut(),
            Accum::Replace,
            centered.as_ref(),
            centered.transpose(),
            1.0 / denom,
            Par::Seq,
        );
        let eig: SymEigen = sym_eigen(gram.as_ref())?;
        // v_k = X_c^T u_k, normalized below
        let top = Mat::<f64>::from_fn(n, latent_dim, |i, k| eig.vectors[(i, n - 1 - k)]);
        let mut proj = Mat::<f64>::zeros(d, latent_dim);
        matmul(
            proj.as_mut(),
            Accum::Replace,
            centered.transpose(),
            top.as_ref(),
            1.0,
            Par::Seq,
        );
        for k in 0..latent_dim {
            variances.push(eig.values[n - 1 - k].max(0.0));
            for j in 0..d {
                basis[k * d + j] = proj[(j, k)];
            }
        }
    }
    orthonormalize_rows(&mut basis, latent_dim, d);
    for k in 0..latent_dim {
        let row = &mut basis[k * d..(k + 1) * d];
        let pivot = row.iter().enumerate().fold(
            (0, 0.0_f64),
            |(bi, bv), (i, &v)| if v.abs() > bv.abs() { (i, v) } else { (bi, bv) },
        );
        if pivot.1 < 0.0 {
            row.iter_mut().for_each(|v| *v = -*v);
        }
    }
    let captured: f64 = variances.iter().sum();
    let explained_variance_ratio = if total_variance > 0.0 {
        (captured / total_variance).min(1.0)
    } else {
        1.0
    };
    Ok(PcaModel {
        mean,
        basis,
        latent_dim,
        input_dim: d,
        variances,
        explained_variance_ratio,
    })
}

/// Two passes of modified Gram-Schmidt. A row that collapses to zero is
/// replaced by the first unit vector not yet spanned.
fn orthonormalize_rows(basis: &mut [f64], m: usize, d: usize) {
    for k in 0..m {
        for _ in 0..2 {
            for p in 0..k {
                let (head, tail) = basis.split_at_mut(k * d);
                let prev = &head[p * d..(p + 1) * d];
                let cur = &mut tail[..d];
                let dot: f64 = prev.iter().zip(cur.iter()).map(|(a, b)| a * b).sum();
                cur.iter_mut().zip(prev).for_each(|(c, q)| *c -= dot * q);
            }
        }
        let norm = basis[k * d..(k + 1) * d].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-12 {
            basis[k * d..(k + 1) * d].iter_mut().for_each(|v| *v /= norm);
        } else {
            fill_with_unit_complement(basis, k, d);
        }
    }
}

fn fill_with_unit_complement(basis: &mut [f64], k: usize, d: usize) {
    for e in 0..d {
        let mut cand = vec![0.0; d];
        cand[e] = 1.0;
        for p in 0..k {
            let prev = &basis[p * d..(p + 1) * d];
            let dot = prev[e];
            cand.iter_mut().zip(prev).for_each(|(c, q)| *c -= dot * q);
        }
        let norm = cand.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.5 {
            basis[k * d..(k + 1) * d]
                .iter_mut()
                .zip(&cand)
                .for_each(|(b, c)| *b = c / norm);
            return;
        }
    }
}

pub fn pca_encode(model: &PcaModel, x: &[f64]) -> Result<Vec<f64>> {
    model.encode(x)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmbedderKind {
    OneHot {
        k: usize,
    },
    NHot {
        k: usize,
    },
    Pixels {
        height: usize,
        width: usize,
        channels: usize,
    },
    Pca(PcaModel),
    Precomputed {
        dim: usize,
    },
}

/// What an embedder can be applied to.
#[derive(Clone, Copy, Debug)]
pub enum EmbedInput<'a> {
    Label(usize),
    Labels(&'a [usize]),
    Image(&'a Image),
    LabelMap(&'a LabelMap),
    Vector(&'a [f64]),
}

/// A named, deterministic embedding function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Embedder {
    pub id: String,
    pub kind: EmbedderKind,
}

impl Embedder {
    pub fn new(id: impl Into<String>, kind: EmbedderKind) -> Self {
        Self { id: id.into(), kind }
    }

    pub fn output_dim(&self) -> usize {
        match &self.kind {
            EmbedderKind::OneHot { k } | EmbedderKind::NHot { k } => *k,
            EmbedderKind::Pixels {
                height,
                width,
                channels,
            } => height * width * channels,
            EmbedderKind::Pca(m) => m.latent_dim,
            EmbedderKind::Precomputed { dim } => *dim,
        }
    }

    pub fn encode(&self, input: EmbedInput<'_>) -> Result<Vec<f64>> {
        let mismatch = || FjdError::InvalidArgument(format!("embedder {} cannot encode {input:?}", self.id));
        match (&self.kind, input) {
            (EmbedderKind::OneHot { k }, EmbedInput::Label(l)) => one_hot(l, *k),
            (EmbedderKind::NHot { k }, EmbedInput::Labels(ls)) => n_hot(ls, *k),
            (EmbedderKind::NHot { k }, EmbedInput::Label(l)) => n_hot(&[l], *k),
            (
                EmbedderKind::Pixels {
                    height,
                    width,
                    channels,
                },
                EmbedInput::Image(img),
            ) => {
                if (img.height(), img.width(), img.channels()) != (*height, *width, *channels) {
                    return Err(FjdError::DimensionMismatch {
                        expected: height * width * channels,
                        got: img.as_slice().len(),
                    });
                }
                flatten_pixels(img)
            }
            (EmbedderKind::Pca(m), EmbedInput::Image(img)) => m.encode(img.as_slice()),
            (EmbedderKind::Pca(m), EmbedInput::LabelMap(map)) => m.encode(&map.to_f64()),
            (EmbedderKind::Pca(m), EmbedInput::Vector(v)) => m.encode(v),
            (EmbedderKind::Precomputed { dim }, EmbedInput::Vector(v)) => {
                if v.len() != *dim {
                    return Err(FjdError::DimensionMismatch {
                        expected: *dim,
                        got: v.len(),
                    });
                }
                Ok(v.to_vec())
            }
            _ => Err(mismatch()),
        }
    }
}
