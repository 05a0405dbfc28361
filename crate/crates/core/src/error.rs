use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("layer cache mismatch: expected {expected} cache, got {found}")]
    CacheMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("unknown architecture '{0}' (expected cnn1, cnn2 or cnn3)")]
    UnknownArch(String),

    #[error("non-finite loss at iteration {iteration}")]
    NonFiniteLoss { iteration: usize },

    #[error("split '{0}' is empty")]
    EmptySplit(&'static str),

    // checkpoint file
    #[error("bad checkpoint magic: expected \"DDNC\", found {0:?}")]
    BadMagic(Vec<u8>),

    #[error("unsupported checkpoint version {found} (expected {expected})")]
    VersionMismatch { found: u8, expected: u8 },

    #[error("truncated checkpoint payload: needed {needed} bytes, found {found}")]
    TruncatedPayload { needed: usize, found: usize },

    #[error("checkpoint header disagrees with payload: {0}")]
    HeaderMismatch(String),

    // PGM images
    #[error("not a binary PGM (magic {0:?})")]
    PgmBadMagic(Vec<u8>),

    #[error("malformed PGM header: {0}")]
    PgmHeader(String),

    #[error("PGM payload too short: expected {expected} bytes, found {found}")]
    PgmTruncated { expected: usize, found: usize },

    // manifests and splits
    #[error("manifest has no samples")]
    EmptyManifest,

    #[error("row {row}: unknown label '{value}' (expected 1=Alert or 2=Drowsy)")]
    UnknownLabel { row: usize, value: String },

    #[error("row {row}: image file {path} does not exist")]
    MissingFile { row: usize, path: PathBuf },

    #[error("row {row}: duplicate path {path}")]
    DuplicatePath { row: usize, path: PathBuf },

    #[error("row {row}: unknown split '{value}'")]
    UnknownSplit { row: usize, value: String },

    #[error("manifest: {0}")]
    Manifest(String),

    #[error("{samples} samples cannot fill {splits} splits")]
    TooFewSamples { samples: usize, splits: usize },

    #[error("cannot read image {path}: {source}")]
    ImageLoad {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error("ensemble members disagree: {0}")]
    EnsembleMismatch(String),

    #[error("config: {0}")]
    Config(String),

    #[error("unknown report format '{0}' (expected text, json or csv)")]
    UnknownFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics themselves rather than of inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::NonFinite(_) | Error::NonFiniteLoss { .. })
    }

    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
