//! Operators that turn a reference dataset into a simulated flawed generator.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FjdError, Result};
use crate::synth::dataset::{mix64, row_rng, scale_index, Conditioning, Factor, PairedDataset};
use crate::synth::sprite::{render_mask, texture_image, SpriteSpec, Texture, SCALE_GRID};

/// Adds `N(0, sigma)` to every pixel and clips to `[0, 1]`.
pub fn perturb_noise(ds: &PairedDataset, sigma: f64, seed: u64) -> Result<PairedDataset> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(FjdError::InvalidArgument(format!(
            "noise sigma must be non-negative, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(ds.clone());
    }
    let normal = Normal::new(0.0, sigma).expect("sigma validated");
    let images = ds
        .images
        .par_iter()
        .enumerate()
        .map(|(i, img)| {
            let mut rng = row_rng(seed, i as u64);
            let mut out = img.clone();
            for v in out.as_mut_slice() {
                *v = (*v + normal.sample(&mut rng)).clamp(0.0, 1.0);
            }
            out
        })
        .collect();
    Ok(PairedDataset { images, ..ds.clone() })
}

fn grid_key(v: f64) -> i64 {
    (v * 1e6).round() as i64
}

/// Factor tuple with `attribute` blanked out; rows sharing a key differ at
/// most in that factor (texture is not part of any conditioning).
fn swap_key(spec: &SpriteSpec, attribute: Factor) -> [i64; 5] {
    let mut key = [
        spec.shape.index() as i64,
        grid_key(spec.scale),
        grid_key(spec.orientation),
        spec.x_pos as i64,
        spec.y_pos as i64,
    ];
    let slot = match attribute {
        Factor::Shape => 0,
        Factor::Scale => 1,
        Factor::Orientation => 2,
        Factor::XPos => 3,
        Factor::YPos => 4,
    };
    key[slot] = 0;
    key
}

fn offset_matches(attribute: Factor, a: f64, b: f64, offset: f64) -> bool {
    const EPS: f64 = 1e-9;
    if attribute == Factor::Orientation {
        let d = (b - a).rem_euclid(360.0);
        (d - offset).abs() < EPS || (d - (360.0 - offset)).abs() < EPS
    } else {
        ((b - a).abs() - offset).abs() < EPS
    }
}

/// Disjoint row pairs that differ only in `attribute`, by exactly `offset`.
///
/// Rows are bucketed by their remaining factors (buckets in sorted key
/// order), sorted by attribute value then row index, and paired greedily.
pub fn swap_candidates(ds: &PairedDataset, attribute: Factor, offset: f64) -> Vec<(usize, usize)> {
    let mut buckets: BTreeMap<[i64; 5], Vec<usize>> = BTreeMap::new();
    for (i, s) in ds.specs.iter().enumerate() {
        buckets.entry(swap_key(s, attribute)).or_default().push(i);
    }
    let mut pairs = Vec::new();
    for rows in buckets.values_mut() {
        rows.sort_by(|&a, &b| {
            attribute
                .value(&ds.specs[a])
                .total_cmp(&attribute.value(&ds.specs[b]))
                .then(a.cmp(&b))
        });
        let mut used = vec![false; rows.len()];
        for p in 0..rows.len() {
            if used[p] {
                continue;
            }
            let va = attribute.value(&ds.specs[rows[p]]);
            let partner = (p + 1..rows.len())
                .find(|&q| !used[q] && offset_matches(attribute, va, attribute.value(&ds.specs[rows[q]]), offset));
            if let Some(q) = partner {
                used[p] = true;
                used[q] = true;
                pairs.push((rows[p], rows[q]));
            }
        }
    }
    pairs
}

/// Exchanges the conditionings of `floor(fraction * N / 2)` disjoint pairs
/// that differ only in `attribute` by `offset`. Images, specs and the
/// conditioning multiset are untouched; only the pairing changes.
pub fn perturb_swap(ds: &PairedDataset, attribute: Factor, offset: f64, fraction: f64) -> Result<PairedDataset> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(FjdError::InvalidArgument(format!(
            "swap fraction {fraction} outside [0, 1]"
        )));
    }
    if attribute == Factor::Shape {
        return Err(FjdError::InvalidArgument(
            "swaps are defined for scale, orientation, x_pos and y_pos".into(),
        ));
    }
    let wanted = (fraction * ds.len() as f64 / 2.0).floor() as usize;
    if wanted == 0 {
        return Ok(ds.clone());
    }
    let candidates = swap_candidates(ds, attribute, offset);
    if candidates.len() < wanted {
        return Err(FjdError::NotEnoughSwapCandidates {
            requested: wanted,
            achievable: candidates.len(),
        });
    }
    // spread the chosen pairs evenly over the candidate list
    let mut out = ds.clone();
    for k in 0..wanted {
        let (a, b) = candidates[k * candidates.len() / wanted];
        out.conds.swap(a, b);
    }
    Ok(out)
}

/// Texture variability within strata of one factor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiversityConfig {
    pub stratify_by: Factor,
    /// 1 keeps the reference texture distribution, 0 gives one texture per stratum.
    pub score: f64,
    pub texture_count: usize,
}

impl DiversityConfig {
    pub fn new(stratify_by: Factor, score: f64) -> Self {
        Self {
            stratify_by,
            score,
            texture_count: Texture::ALL.len(),
        }
    }
}

pub const STRATA: usize = 3;

/// Stratum index in `0..STRATA` of a spec along `factor`.
pub fn stratum(spec: &SpriteSpec, factor: Factor) -> usize {
    let bin = |t: f64| ((t * STRATA as f64).floor() as usize).min(STRATA - 1);
    match factor {
        Factor::Shape => spec.shape.index() % STRATA,
        Factor::Scale => bin(scale_index(spec.scale) as f64 / SCALE_GRID.len() as f64),
        Factor::Orientation => bin(spec.orientation / 360.0),
        Factor::XPos | Factor::YPos => {
            let (lo, hi) = SpriteSpec::position_range(SCALE_GRID[0]);
            let p = if factor == Factor::XPos { spec.x_pos } else { spec.y_pos };
            bin((p - lo) as f64 / (hi - lo + 1) as f64)
        }
    }
}

/// Redraws textures so that within each stratum the texture law is
/// `score * uniform(T) + (1 - score) * point mass`, stratum `k` being
/// assigned texture `k mod T`.
///
/// Each row draws one uniform `u`; it keeps its (uniformly distributed)
/// reference texture when `u < score`. Lowering the score therefore only
/// ever converts more rows to their stratum texture.
pub fn apply_diversity(base: &PairedDataset, cfg: &DiversityConfig, seed: u64) -> Result<PairedDataset> {
    if !(0.0..=1.0).contains(&cfg.score) {
        return Err(FjdError::InvalidArgument(format!(
            "diversity score {} outside [0, 1]",
            cfg.score
        )));
    }
    let t = cfg.texture_count;
    if t == 0 || t > Texture::ALL.len() {
        return Err(FjdError::InvalidArgument(format!(
            "texture count {t} outside 1..={}",
            Texture::ALL.len()
        )));
    }
    let rows = base
        .specs
        .par_iter()
        .enumerate()
        .map(|(i, spec)| {
            let mut rng = row_rng(seed, i as u64);
            let u: f64 = rng.random();
            let redraw = rng.random_range(0..t);
            let texture = if u < cfg.score {
                if spec.texture.index() < t {
                    spec.texture
                } else {
                    Texture::ALL[redraw]
                }
            } else {
                Texture::ALL[stratum(spec, cfg.stratify_by) % t]
            };
            let new_spec = SpriteSpec { texture, ..*spec };
            let image = if texture == spec.texture {
                base.images[i].clone()
            } else {
                texture_image(&render_mask(&new_spec)?, texture)
            };
            Ok((new_spec, image))
        })
        .collect::<Result<Vec<_>>>()?;
    let (specs, images) = rows.into_iter().unzip();
    Ok(PairedDataset {
        images,
        specs,
        conds: base.conds.clone(),
        cond_type: base.cond_type,
        seed: base.seed,
    })
}

fn hamming(a: &[u8], b: &[u8]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

fn attribute_rows(ds: &PairedDataset) -> Result<Vec<&[u8]>> {
    ds.conds
        .iter()
        .map(|c| match c {
            Conditioning::Attributes(v) => Ok(v.as_slice()),
            _ => Err(FjdError::InvalidArgument(
                "attribute swaps need attribute-vector conditionings".into(),
            )),
        })
        .collect()
}

/// Mean Hamming distance between row-aligned attribute conditionings.
pub fn mean_hamming(a: &PairedDataset, b: &PairedDataset) -> Result<f64> {
    let (ra, rb) = (attribute_rows(a)?, attribute_rows(b)?);
    if ra.len() != rb.len() || ra.is_empty() {
        return Err(FjdError::InvalidArgument(
            "datasets must be non-empty and aligned".into(),
        ));
    }
    Ok(ra.iter().zip(&rb).map(|(x, y)| hamming(x, y)).sum::<usize>() as f64 / ra.len() as f64)
}

/// Relative tolerance on the achieved mean Hamming distance.
pub const HAMMING_TOLERANCE: f64 = 0.05;

/// Permutes attribute conditionings among rows so the mean Hamming
/// distance to the original vectors is within 5% of `target`.
///
/// A seeded row order is drawn and the first `k` rows in it pass their
/// conditioning one step along a cycle; `k` is chosen to land closest to
/// the target. If even a full cycle falls short, pairwise exchanges that
/// raise the distance are applied until the target is reached.
pub fn perturb_attribute_swap(ds: &PairedDataset, target: f64, seed: u64) -> Result<PairedDataset> {
    let attrs = attribute_rows(ds)?;
    let n = attrs.len();
    if !(target >= 0.0 && target.is_finite()) {
        return Err(FjdError::InvalidArgument(format!("invalid Hamming target {target}")));
    }
    if target == 0.0 || n < 2 {
        return if target == 0.0 {
            Ok(ds.clone())
        } else {
            Err(FjdError::UnreachableTarget {
                target,
                achievable: 0.0,
            })
        };
    }
    let mut rng = row_rng(mix64(seed), u64::MAX);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);

    // total(k) = sum_{i<k-1} H(o_i, o_{i+1}) + H(o_{k-1}, o_0)
    let mut prefix = vec![0usize; n];
    for i in 1..n {
        prefix[i] = prefix[i - 1] + hamming(attrs[order[i - 1]], attrs[order[i]]);
    }
    let mean_for = |k: usize| -> f64 {
        if k < 2 {
            return 0.0;
        }
        (prefix[k - 1] + hamming(attrs[order[k - 1]], attrs[order[0]])) as f64 / n as f64
    };
    let best_k = (0..=n)
        .min_by(|&a, &b| (mean_for(a) - target).abs().total_cmp(&(mean_for(b) - target).abs()))
        .unwrap_or(0);

    // assignment[row] = index of the row whose conditioning it receives
    let mut assignment: Vec<usize> = (0..n).collect();
    if best_k >= 2 {
        for i in 0..best_k {
            assignment[order[i]] = order[(i + 1) % best_k];
        }
    }
    let mut total: usize = (0..n).map(|r| hamming(attrs[r], attrs[assignment[r]])).sum();
    let within = |total: usize| ((total as f64 / n as f64) - target).abs() <= HAMMING_TOLERANCE * target;

    if !within(total) && (total as f64 / n as f64) < target {
        let max_iter = 200 * n;
        for _ in 0..max_iter {
            if within(total) {
                break;
            }
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            if a == b {
                continue;
            }
            let before = hamming(attrs[a], attrs[assignment[a]]) + hamming(attrs[b], attrs[assignment[b]]);
            let after = hamming(attrs[a], attrs[assignment[b]]) + hamming(attrs[b], attrs[assignment[a]]);
            if after > before {
                assignment.swap(a, b);
                total = total + after - before;
            }
        }
    }
    if !within(total) {
        return Err(FjdError::UnreachableTarget {
            target,
            achievable: total as f64 / n as f64,
        });
    }
    let mut out = ds.clone();
    out.conds = assignment.iter().map(|&src| ds.conds[src].clone()).collect();
    Ok(out)
}
