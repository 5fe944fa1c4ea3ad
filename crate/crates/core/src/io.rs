//! FJDE embedding files, dataset manifests and result tables on disk.
//!
//! An FJDE file is a 25-byte little-endian header followed by the payload:
//!
//! | offset | size | field                      |
//! |--------|------|----------------------------|
//! | 0      | 4    | magic `b"FJDE"`            |
//! | 4      | 4    | version, `u32` = 1         |
//! | 8      | 1    | dtype, `u8` (1 = `f32`)    |
//! | 9      | 8    | rows, `u64`                |
//! | 17     | 8    | cols, `u64`                |
//! | 25     | 4·rows·cols | row-major `f32` values |

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::embedders::{bbox_geometric, flatten_pixels, one_hot};
use crate::embedding::EmbeddingSet;
use crate::error::{FjdError, Result};
use crate::harness::{ResultTable, SHAPE_CLASSES};
use crate::synth::dataset::{make_dataset, make_grouped_dataset, CondType, Conditioning, GroupLayout, PairedDataset};
use crate::synth::perturb::{apply_diversity, perturb_attribute_swap, perturb_noise, perturb_swap, DiversityConfig};

pub const MAGIC: &[u8; 4] = b"FJDE";
pub const FORMAT_VERSION: u32 = 1;
pub const DTYPE_F32: u8 = 1;
pub const HEADER_LEN: usize = 25;
pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

pub fn encode_embeddings(set: &EmbeddingSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * set.as_slice().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.push(DTYPE_F32);
    out.extend_from_slice(&(set.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(set.cols() as u64).to_le_bytes());
    for &v in set.as_slice() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

/// Parses an FJDE buffer, validating the whole header before touching the
/// payload. Values are widened to `f64`.
pub fn decode_embeddings(bytes: &[u8]) -> Result<EmbeddingSet> {
    if bytes.len() < MAGIC.len() || &bytes[..4] != MAGIC {
        return Err(FjdError::NotFjde);
    }
    if bytes.len() < HEADER_LEN {
        return Err(FjdError::CorruptFile {
            expected: HEADER_LEN as u64,
            actual: bytes.len() as u64,
        });
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(FjdError::UnsupportedVersion(version));
    }
    let dtype = bytes[8];
    if dtype != DTYPE_F32 {
        return Err(FjdError::UnsupportedDtype(dtype));
    }
    let rows = u64::from_le_bytes(bytes[9..17].try_into().expect("8 bytes"));
    let cols = u64::from_le_bytes(bytes[17..25].try_into().expect("8 bytes"));
    let payload = &bytes[HEADER_LEN..];
    let expected = rows
        .checked_mul(cols)
        .and_then(|c| c.checked_mul(4))
        .ok_or(FjdError::CorruptFile {
            expected: u64::MAX,
            actual: payload.len() as u64,
        })?;
    if payload.len() as u64 != expected {
        return Err(FjdError::CorruptFile {
            expected,
            actual: payload.len() as u64,
        });
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    EmbeddingSet::new(rows as usize, cols as usize, data)
}

pub fn write_embeddings(set: &EmbeddingSet, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_embeddings(set))?;
    Ok(())
}

pub fn read_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingSet> {
    let path = path.as_ref();
    let set = decode_embeddings(&fs::read(path)?)?;
    Ok(set.with_source(path.display().to_string()))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

/// One step of the chain applied to the base corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Perturbation {
    Noise {
        sigma: f64,
        seed: u64,
    },
    Swap {
        attribute: crate::synth::dataset::Factor,
        offset: f64,
        fraction: f64,
    },
    Diversity {
        config: DiversityConfig,
        seed: u64,
    },
    AttributeSwap {
        target: f64,
        seed: u64,
    },
}

impl Perturbation {
    pub fn apply(&self, ds: &PairedDataset) -> Result<PairedDataset> {
        match self {
            Perturbation::Noise { sigma, seed } => perturb_noise(ds, *sigma, *seed),
            Perturbation::Swap {
                attribute,
                offset,
                fraction,
            } => perturb_swap(ds, *attribute, *offset, *fraction),
            Perturbation::Diversity { config, seed } => apply_diversity(ds, config, *seed),
            Perturbation::AttributeSwap { target, seed } => perturb_attribute_swap(ds, *target, *seed),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub cond_type: CondType,
    pub n: usize,
    pub seed: u64,
    /// Grouped swap corpus instead of independent draws.
    pub layout: Option<GroupLayout>,
    pub perturbations: Vec<Perturbation>,
}

impl GeneratorConfig {
    pub fn generate(&self) -> Result<PairedDataset> {
        let mut ds = match &self.layout {
            Some(layout) => make_grouped_dataset(self.n, self.cond_type, layout, self.seed)?,
            None => make_dataset(self.n, self.cond_type, self.seed)?,
        };
        for p in &self.perturbations {
            ds = p.apply(&ds)?;
        }
        Ok(ds)
    }
}

/// Everything needed to regenerate a synthetic corpus and check the result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub schema_version: u32,
    pub generator: GeneratorConfig,
    pub embedder_ids: Vec<String>,
    /// File name to SHA-256 hex digest.
    pub checksums: BTreeMap<String, String>,
}

pub const IMAGES_FILE: &str = "images.fjde";
pub const CONDS_FILE: &str = "conds.fjde";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Raw row encodings written next to a manifest: flattened pixels, and
/// the conditioning as one-hot class, box geometry plus class, mask
/// raster, or attribute bits.
pub fn raw_embeddings(ds: &PairedDataset) -> Result<(EmbeddingSet, EmbeddingSet)> {
    let images = ds.images.iter().map(flatten_pixels).collect::<Result<Vec<_>>>()?;
    let conds = ds
        .conds
        .iter()
        .map(|c| match c {
            Conditioning::Class(k) => one_hot(*k, SHAPE_CLASSES),
            Conditioning::BBox { bbox, class } => bbox_geometric(bbox, *class, SHAPE_CLASSES),
            Conditioning::Mask(m) => Ok(m.to_f64()),
            Conditioning::Attributes(v) => Ok(v.iter().map(|&b| b as f64).collect()),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((EmbeddingSet::from_rows(&images)?, EmbeddingSet::from_rows(&conds)?))
}

fn raw_ids(ct: CondType) -> Vec<String> {
    let cond = match ct {
        CondType::Class => format!("onehot{SHAPE_CLASSES}"),
        CondType::BBox => format!("bbox-geometric+onehot{SHAPE_CLASSES}"),
        CondType::Mask => "mask-raster".to_string(),
        CondType::Attributes => "attributes".to_string(),
    };
    vec!["pixels".to_string(), cond]
}

fn emitted_files(generator: &GeneratorConfig) -> Result<Vec<(&'static str, Vec<u8>)>> {
    let (images, conds) = raw_embeddings(&generator.generate()?)?;
    Ok(vec![
        (IMAGES_FILE, encode_embeddings(&images)),
        (CONDS_FILE, encode_embeddings(&conds)),
    ])
}

/// Generates the corpus, writes its raw embeddings and a manifest into
/// `dir`, and returns the manifest.
pub fn write_dataset(generator: &GeneratorConfig, dir: impl AsRef<Path>) -> Result<DatasetManifest> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut checksums = BTreeMap::new();
    for (name, bytes) in emitted_files(generator)? {
        fs::write(dir.join(name), &bytes)?;
        checksums.insert(name.to_string(), sha256_hex(&bytes));
    }
    let manifest = DatasetManifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        generator: generator.clone(),
        embedder_ids: raw_ids(generator.cond_type),
        checksums,
    };
    fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let m: DatasetManifest = serde_json::from_slice(&fs::read(path)?)?;
    if m.schema_version != MANIFEST_SCHEMA_VERSION {
        return Err(FjdError::UnsupportedVersion(m.schema_version));
    }
    Ok(m)
}

/// Regenerates the corpus described by `manifest` and checks every
/// recorded checksum against the fresh output.
pub fn regenerate(manifest: &DatasetManifest) -> Result<PairedDataset> {
    let ds = manifest.generator.generate()?;
    let (images, conds) = raw_embeddings(&ds)?;
    for (name, set) in [(IMAGES_FILE, &images), (CONDS_FILE, &conds)] {
        if let Some(expected) = manifest.checksums.get(name) {
            let actual = sha256_hex(&encode_embeddings(set));
            if &actual != expected {
                return Err(FjdError::ChecksumMismatch {
                    name: name.to_string(),
                    expected: expected.clone(),
                    actual,
                });
            }
        }
    }
    Ok(ds)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResultFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ResultFormat {
    type Err = FjdError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ResultFormat::Csv),
            "json" => Ok(ResultFormat::Json),
            _ => Err(FjdError::InvalidArgument(format!("unknown output format {s:?}"))),
        }
    }
}

pub const CSV_HEADER: &str = "sweep_value,fid,fjd,alpha,clamped_count";

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn results_to_csv(table: &ResultTable) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in &table.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            format_f64(r.sweep_value),
            format_f64(r.fid),
            format_f64(r.fjd),
            format_f64(r.alpha),
            r.clamped_count
        );
    }
    out
}

pub fn results_to_json(table: &ResultTable) -> Result<String> {
    Ok(serde_json::to_string_pretty(table)? + "\n")
}

pub fn write_results(table: &ResultTable, path: impl AsRef<Path>, format: ResultFormat) -> Result<()> {
    if table.rows.is_empty() {
        return Err(FjdError::InvalidArgument("result table is empty".into()));
    }
    let text = match format {
        ResultFormat::Csv => results_to_csv(table),
        ResultFormat::Json => results_to_json(table)?,
    };
    let mut f = fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

pub fn read_results_json(path: impl AsRef<Path>) -> Result<ResultTable> {
    Ok(serde_json::from_slice(&fs::read(path)?)?)
}
