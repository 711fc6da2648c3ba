//! Dense optical flow by polynomial expansion, per-frame motion scores and the
//! high-motion (blur) filter.

mod filter;
mod flow;
mod poly;
mod score;

pub use filter::{gaussian_kernel, resize_bilinear, separable_filter};
pub use flow::{farneback_flow, FlowField, FlowParams};
pub use poly::{polynomial_expansion, PolyCoeffs};
pub use score::{
    blur_filter, discard_count, motion_scores, write_motion_scores, BlurPartition, MotionScorer,
    DEFAULT_BLUR_FRACTION,
};
