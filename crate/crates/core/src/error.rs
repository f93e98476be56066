use std::path::PathBuf;

use crate::image::ExposureType;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("exposure ratios (iso x{iso_ratio:.3}, time x{time_ratio:.3}) match no auto/over/under pattern")]
    UnclassifiableExposure { iso_ratio: f64, time_ratio: f64 },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("manifest schema violation at line {line}: {message}")]
    Schema { line: u64, message: String },

    #[error("duplicate manifest entry ({camera_id}, {scene_id}, {exposure})")]
    DuplicateEntry {
        camera_id: String,
        scene_id: String,
        exposure: ExposureType,
    },

    #[error("manifest references missing image {}", .0.display())]
    MissingAsset(PathBuf),

    #[error("cannot decode image {}: {message}", path.display())]
    Decode { path: PathBuf, message: String },

    #[error("camera {camera_id}: {have} eligible scenes, {need} required")]
    InsufficientImages {
        camera_id: String,
        have: usize,
        need: usize,
    },

    #[error("invalid fingerprint file: {0}")]
    Format(String),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable machine-readable tag for the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::UnclassifiableExposure { .. } => "unclassifiable_exposure",
            Error::DegenerateInput(_) => "degenerate_input",
            Error::MissingFile(_) => "missing_file",
            Error::Schema { .. } => "schema",
            Error::DuplicateEntry { .. } => "duplicate_entry",
            Error::MissingAsset(_) => "missing_asset",
            Error::Decode { .. } => "decode",
            Error::InsufficientImages { .. } => "insufficient_images",
            Error::Format(_) => "format",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}

pub(crate) fn ensure_same_shape(expected: (usize, usize), found: (usize, usize)) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::ShapeMismatch { expected, found })
    }
}
