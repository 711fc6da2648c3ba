use std::io::Write;

use ndarray::Array2;

use super::flow::{farneback_flow, FlowParams};
use crate::error::{Error, Result};
use crate::model::{FrameRecord, FrameStatus};
use crate::scalar::Scalar;

pub const DEFAULT_BLUR_FRACTION: f64 = 0.2;

/// Streaming motion scorer: feed frames in order, get one score per frame.
///
/// The first frame scores 0; every later frame scores the mean flow magnitude
/// from its predecessor.
pub struct MotionScorer<T> {
    params: FlowParams,
    previous: Option<Array2<T>>,
    index: usize,
}

impl<T: Scalar> MotionScorer<T> {
    pub fn new(params: FlowParams) -> Self {
        MotionScorer {
            params,
            previous: None,
            index: 0,
        }
    }

    pub fn push(&mut self, frame: Array2<T>) -> Result<T> {
        let index = self.index;
        self.index += 1;
        let score = match &self.previous {
            None => T::zero(),
            Some(prev) => farneback_flow(prev, &frame, &self.params)
                .map_err(|e| e.at_frame(index))?
                .mean_magnitude(),
        };
        self.previous = Some(frame);
        Ok(score)
    }
}

/// Scores every frame of a video, `score[0] = 0`.
pub fn motion_scores<T: Scalar>(frames: &[Array2<T>], params: &FlowParams) -> Result<Vec<T>> {
    if frames.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut scorer = MotionScorer::new(*params);
    frames.iter().map(|f| scorer.push(f.clone())).collect()
}

/// Number of frames dropped as high-motion out of `n`: `ceil(fraction · n)`.
pub fn discard_count(n: usize, fraction: f64) -> usize {
    // the small slack absorbs representation error in products like 0.2 · 5
    let raw = fraction * n as f64 - 1e-9;
    (raw.ceil().max(0.0) as usize).min(n)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BlurPartition {
    /// Promoted to CANDIDATE, in frame order.
    pub retained: Vec<FrameRecord>,
    /// Marked DISCARDED_HIGH_MOTION, in frame order.
    pub discarded: Vec<FrameRecord>,
}

/// Drops the `ceil(fraction · n)` highest-motion frames of one video's
/// detected frames. Equal scores discard the later frame first.
pub fn blur_filter(frames: Vec<FrameRecord>, fraction: f64) -> Result<BlurPartition> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::InvalidParameter(format!(
            "blur fraction {fraction} not in [0,1)"
        )));
    }
    let mut scored = Vec::with_capacity(frames.len());
    for f in frames {
        let score = match (f.status, f.motion_score) {
            (FrameStatus::Detected, Some(s)) if s.is_finite() => s,
            _ => {
                return Err(Error::IllegalTransition {
                    from: f.status,
                    to: FrameStatus::Candidate,
                })
            }
        };
        scored.push((score, f));
    }
    let n = scored.len();
    let cut = discard_count(n, fraction);
    scored.sort_by(|(sa, fa), (sb, fb)| sb.total_cmp(sa).then(fb.frame_index.cmp(&fa.frame_index)));

    let mut part = BlurPartition::default();
    for (rank, (_, mut f)) in scored.into_iter().enumerate() {
        if rank < cut {
            f.advance(FrameStatus::DiscardedHighMotion)?;
            part.discarded.push(f);
        } else {
            f.advance(FrameStatus::Candidate)?;
            part.retained.push(f);
        }
    }
    part.retained.sort_by_key(|f| f.frame_index);
    part.discarded.sort_by_key(|f| f.frame_index);
    Ok(part)
}

/// Writes `video_id,frame_index,score` rows under a header.
pub fn write_motion_scores<W: Write>(out: W, rows: &[(String, usize, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::Malformed {
        what: "motion_scores",
        path: "motion_scores.csv".into(),
        line: 0,
        message: e.to_string(),
    };
    w.write_record(["video_id", "frame_index", "score"])
        .map_err(err)?;
    for (video, idx, score) in rows {
        w.write_record([video.as_str(), &idx.to_string(), &score.to_string()])
            .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io("motion_scores.csv", e))
}
