use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by loaders, stores and numeric routines.
#[derive(Error, Debug)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing manifest file {0}")]
    MissingManifest(PathBuf),
    #[error("malformed {what} at {path}:{line}: {message}")]
    Malformed {
        what: &'static str,
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error(
        "video {video_id}: manifest declares {declared} frames but {found} frame files are present"
    )]
    FrameCountMismatch {
        video_id: String,
        declared: usize,
        found: usize,
    },
    #[error("duplicate video id {0}")]
    DuplicateVideo(String),
    #[error("invalid bounding box: {0}")]
    InvalidBox(String),
    #[error("degenerate crop for {frame}: box rounds to {width}x{height} pixels")]
    DegenerateCrop {
        frame: String,
        width: u32,
        height: u32,
    },
    #[error("image error for {path}: {message}")]
    Image { path: PathBuf, message: String },
    #[error("illegal status transition {from:?} -> {to:?}")]
    IllegalTransition {
        from: crate::model::FrameStatus,
        to: crate::model::FrameStatus,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("image too small: {width}x{height}, need at least {min} in each dimension")]
    ImageTooSmall {
        width: usize,
        height: usize,
        min: usize,
    },
    #[error("frame {frame_index}: {source}")]
    AtFrame {
        frame_index: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("insufficient data: need at least {min} points, got {actual}")]
    InsufficientData { min: usize, actual: usize },
    #[error("non-finite value in input")]
    NonFinite,
    #[error("at least two non-empty clusters are required")]
    SingleCluster,
    #[error("bad embedding file magic")]
    BadMagic,
    #[error("unsupported embedding file version {0}")]
    UnsupportedVersion(u8),
    #[error("truncated embedding file: {0}")]
    Truncated(String),
    #[error("encoder mismatch: store uses {expected:?}, record uses {actual:?}")]
    EncoderMismatch { expected: String, actual: String },
    #[error("duplicate embedding key {0}")]
    DuplicateKey(String),
    #[error("zero-norm vector")]
    ZeroVector,
    #[error("no eligible gallery record for query {video_id}/{frame_index}")]
    NoEligibleMatch {
        video_id: String,
        frame_index: usize,
    },
    #[error("empty input")]
    EmptyInput,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("video sets differ between methods {0} and {1}")]
    VideoSetMismatch(String, String),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn at_frame(self, frame_index: usize) -> Self {
        Error::AtFrame {
            frame_index,
            source: Box::new(self),
        }
    }
}
