//! Video key-frame extraction and embedding-based re-identification of
//! individually banded birds.
//!
//! Stages: dense-flow motion scoring and blur removal ([`motion`]),
//! clustering-based key-frame selection ([`keyframes`]), cosine matching
//! against a labelled gallery ([`reid`]) and video-level evaluation
//! ([`evaluate`]). Embeddings are persisted in the `.emb` format ([`store`]).

pub mod error;
pub mod evaluate;
pub mod keyframes;
pub mod linalg;
pub mod model;
pub mod motion;
pub mod reid;
pub mod scalar;
pub mod store;

pub use error::{Error, Result};
pub use keyframes::{KeyFrameSet, SelectConfig, SelectionKind, SelectionMethod};
pub use model::{BoundingBox, EmbeddingRecord, FrameKey, FrameRecord, FrameStatus, VideoManifest};
pub use motion::{FlowParams, MotionScorer};
pub use reid::{Gallery, MatchResult};
pub use scalar::Scalar;
pub use store::EmbeddingStore;

pub type FlowField32 = motion::FlowField<f32>;
pub type FlowField64 = motion::FlowField<f64>;
pub type KMeansFit64 = keyframes::KMeansFit<f64>;
pub type KMedoidsFit64 = keyframes::KMedoidsFit<f64>;
pub type Pca64 = keyframes::Pca<f64>;
/// Exact p-values from the McNemar test.
pub type ExactProbability = num_rational::BigRational;
