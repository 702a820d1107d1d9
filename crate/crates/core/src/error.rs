use thiserror::Error;

/// Every failure the library can report.
///
/// Each variant carries a stable machine-readable [`Error::code`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },
    #[error("point is behind the camera (z = {0})")]
    BehindCamera(f64),
    #[error("invalid depth {0}")]
    InvalidDepth(f64),
    #[error("value {0} is too close to zero for reciprocal conversion")]
    NearZero(f64),
    #[error("mask is empty")]
    EmptyMask,
    #[error("no valid depth inside mask")]
    EmptySupport,
    #[error("degenerate shape: {0}")]
    DegenerateShape(String),
    #[error("degenerate layout: {0}")]
    DegenerateLayout(String),
    #[error("invalid loss ledger: {0}")]
    InvalidLedger(String),
    #[error("encoding error: {0}")]
    Encoding(String),
    #[error("decode error: {0}")]
    Decode(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("image error: {0}")]
    Image(#[from] image::ImageError),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid_argument",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::BehindCamera(_) => "behind_camera",
            Error::InvalidDepth(_) => "invalid_depth",
            Error::NearZero(_) => "near_zero",
            Error::EmptyMask => "empty_mask",
            Error::EmptySupport => "empty_support",
            Error::DegenerateShape(_) => "degenerate_shape",
            Error::DegenerateLayout(_) => "degenerate_layout",
            Error::InvalidLedger(_) => "invalid_ledger",
            Error::Encoding(_) => "encoding_error",
            Error::Decode(_) => "decode_error",
            Error::Parse(_) => "parse_error",
            Error::Io(_) => "io_error",
            Error::Image(_) => "image_error",
            Error::Json(_) => "json_error",
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn check_dims(expected: (usize, usize), actual: (usize, usize)) -> Result<()> {
        if expected == actual {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected, actual })
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
