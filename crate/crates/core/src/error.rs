use thiserror::Error;

pub type Result<T> = std::result::Result<T, FjdError>;

#[derive(Debug, Error)]
pub enum FjdError {
    #[error("insufficient samples: need at least {needed} rows, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("invalid embedding: non-finite value at row {row}, column {col}")]
    InvalidEmbedding { row: usize, col: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("row count mismatch: image set has {image} rows, conditioning set has {cond}")]
    RowCountMismatch { image: usize, cond: usize },

    #[error("matrix not PSD within tolerance: eigenvalue {eigenvalue:e} below -{tolerance:e}")]
    NotPsd { eigenvalue: f64, tolerance: f64 },

    #[error("eigendecomposition did not converge")]
    EigenFailure,

    #[error("degenerate conditioning embedding: mean conditioning norm is zero")]
    DegenerateConditioning,

    #[error("latent dimension too large: requested {requested}, at most {max} allowed")]
    LatentDimTooLarge { requested: usize, max: usize },

    #[error("label {label} out of range for alphabet of size {k}")]
    LabelOutOfRange { label: usize, k: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("not enough swap candidates: requested {requested} pairs, only {achievable} achievable")]
    NotEnoughSwapCandidates { requested: usize, achievable: usize },

    #[error("unreachable mean Hamming target {target}: closest achievable is {achievable:.4}")]
    UnreachableTarget { target: f64, achievable: f64 },

    #[error("samples must be disjoint: both halves use seed {0}")]
    SamplesNotDisjoint(u64),

    #[error("not an FJDE file")]
    NotFjde,

    #[error("unsupported FJDE version {0}")]
    UnsupportedVersion(u32),

    #[error("unsupported dtype code {0}")]
    UnsupportedDtype(u8),

    #[error("corrupt file: expected {expected} bytes, found {actual}")]
    CorruptFile { expected: u64, actual: u64 },

    #[error("checksum mismatch for {name}: manifest has {expected}, regenerated {actual}")]
    ChecksumMismatch {
        name: String,
        expected: String,
        actual: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl FjdError {
    /// True for failures of the numerical core rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, FjdError::NotPsd { .. } | FjdError::EigenFailure)
    }
}
