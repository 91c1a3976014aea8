use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by `liref-core`.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid light field: {0}")]
    InvalidLightField(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("missing view file {path} for grid position ({row}, {col})")]
    MissingView {
        path: PathBuf,
        row: usize,
        col: usize,
    },

    #[error("angular grid {rows}x{cols} has no central view (must be square and odd)")]
    EvenGrid { rows: usize, cols: usize },

    #[error("unsupported image format in {path}: {reason}")]
    UnsupportedImage { path: PathBuf, reason: String },

    #[error("failed to parse {what}: {reason}")]
    Parse { what: String, reason: String },

    #[error("non-finite loss at epoch {epoch}: {value}")]
    NonFiniteLoss { epoch: usize, value: f64 },

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn shape_mismatch(what: impl Into<String>) -> Error {
    Error::ShapeMismatch(what.into())
}

pub(crate) fn invalid(what: impl Into<String>) -> Error {
    Error::InvalidArgument(what.into())
}
