//! Shared domain types and the on-disk interchange formats.

mod crop;
mod detections;
mod frames;
mod manifest;
mod types;

pub use crop::{crop_frame, crop_rect, round_half_away, CropRect};
pub use detections::{
    load_detections, parse_detections, write_detections, DetectionRow, Detections,
};
pub use frames::{frame_file_name, frame_path, load_gray_frame, luminance, to_gray};
pub use manifest::{
    load_labels, load_manifest, write_labels, write_manifest, ManifestEntry, VideoManifest,
    LABELS_FILE, MANIFEST_FILE,
};
pub use types::{
    BoundingBox, EmbeddingRecord, FrameKey, FrameRecord, FrameStatus, CLAMP_TOLERANCE,
};

/// Default detector confidence floor.
pub const DEFAULT_CONFIDENCE_FLOOR: f64 = 0.8;
