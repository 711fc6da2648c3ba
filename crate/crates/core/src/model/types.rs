use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack allowed on raw box coordinates before they are rejected rather than clamped.
pub const CLAMP_TOLERANCE: f64 = 1e-6;

/// Normalized center-format detection box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
    pub confidence: f64,
}

impl BoundingBox {
    /// Validates raw coordinates and clamps the box into the unit square.
    ///
    /// Each of `cx, cy, w, h` may exceed `[0, 1]` by at most [`CLAMP_TOLERANCE`];
    /// edges that stick out of the image are pulled back onto it and the
    /// center/size recomputed from the clamped edges.
    pub fn clamped(cx: f64, cy: f64, w: f64, h: f64, confidence: f64) -> Result<Self> {
        for (name, v) in [("cx", cx), ("cy", cy), ("w", w), ("h", h)] {
            if !(-CLAMP_TOLERANCE..=1.0 + CLAMP_TOLERANCE).contains(&v) {
                return Err(Error::InvalidBox(format!("{name}={v} outside [0,1]")));
            }
        }
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::InvalidBox(format!(
                "confidence {confidence} outside [0,1]"
            )));
        }
        let (cx, w) = clamp_axis(cx, w);
        let (cy, h) = clamp_axis(cy, h);
        if w <= 0.0 || h <= 0.0 {
            return Err(Error::InvalidBox(format!("non-positive size {w}x{h}")));
        }
        Ok(BoundingBox {
            cx,
            cy,
            w,
            h,
            confidence,
        })
    }

    pub fn is_valid(&self) -> bool {
        let inside = |c: f64, s: f64| {
            s > 0.0 && c - s / 2.0 >= -CLAMP_TOLERANCE && c + s / 2.0 <= 1.0 + CLAMP_TOLERANCE
        };
        inside(self.cx, self.w) && inside(self.cy, self.h) && (0.0..=1.0).contains(&self.confidence)
    }
}

fn clamp_axis(center: f64, size: f64) -> (f64, f64) {
    let (lo, hi) = (center - size / 2.0, center + size / 2.0);
    if lo >= 0.0 && hi <= 1.0 {
        return (center, size);
    }
    let (lo, hi) = (lo.clamp(0.0, 1.0), hi.clamp(0.0, 1.0));
    ((lo + hi) / 2.0, hi - lo)
}

/// Lifecycle of a frame through extraction and selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FrameStatus {
    Raw,
    Detected,
    Candidate,
    Keyframe,
    DiscardedNoDetection,
    DiscardedHighMotion,
}

impl FrameStatus {
    pub fn can_transition_to(self, next: FrameStatus) -> bool {
        use FrameStatus::*;
        matches!(
            (self, next),
            (Raw, Detected)
                | (Raw, DiscardedNoDetection)
                | (Detected, Candidate)
                | (Detected, DiscardedHighMotion)
                | (Candidate, Keyframe)
        )
    }

    pub fn is_terminal(self) -> bool {
        matches!(
            self,
            FrameStatus::Keyframe
                | FrameStatus::DiscardedNoDetection
                | FrameStatus::DiscardedHighMotion
        )
    }
}

/// Identity of one frame: `video_id/frame_index`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FrameKey {
    pub video_id: String,
    pub frame_index: usize,
}

impl FrameKey {
    pub fn new(video_id: impl Into<String>, frame_index: usize) -> Self {
        FrameKey {
            video_id: video_id.into(),
            frame_index,
        }
    }

    /// Parses `video_id/frame_index`, splitting at the last slash.
    pub fn parse(s: &str) -> Option<Self> {
        let (video, idx) = s.rsplit_once('/')?;
        Some(FrameKey::new(video, idx.parse().ok()?))
    }
}

impl fmt::Display for FrameKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.video_id, self.frame_index)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub video_id: String,
    pub frame_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detection: Option<BoundingBox>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub motion_score: Option<f64>,
    pub status: FrameStatus,
}

impl FrameRecord {
    pub fn raw(video_id: impl Into<String>, frame_index: usize) -> Self {
        FrameRecord {
            video_id: video_id.into(),
            frame_index,
            detection: None,
            motion_score: None,
            status: FrameStatus::Raw,
        }
    }

    pub fn key(&self) -> FrameKey {
        FrameKey::new(self.video_id.clone(), self.frame_index)
    }

    /// Moves to `next`, refusing transitions outside the frame lifecycle or
    /// candidate/key-frame states without detection and motion score.
    pub fn advance(&mut self, next: FrameStatus) -> Result<()> {
        if !self.status.can_transition_to(next) {
            return Err(Error::IllegalTransition {
                from: self.status,
                to: next,
            });
        }
        if matches!(next, FrameStatus::Candidate | FrameStatus::Keyframe)
            && (self.detection.is_none() || self.motion_score.is_none())
        {
            return Err(Error::IllegalTransition {
                from: self.status,
                to: next,
            });
        }
        if next == FrameStatus::Detected && self.detection.is_none() {
            return Err(Error::IllegalTransition {
                from: self.status,
                to: next,
            });
        }
        self.status = next;
        Ok(())
    }
}

/// One frame's feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRecord {
    pub video_id: String,
    pub frame_index: usize,
    pub encoder_id: String,
    pub vector: Vec<f32>,
    pub label: Option<String>,
}

impl EmbeddingRecord {
    pub fn key(&self) -> FrameKey {
        FrameKey::new(self.video_id.clone(), self.frame_index)
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn clamp_pulls_right_edge_onto_image() {
        let b = BoundingBox::clamped(0.99, 0.5, 0.2, 0.2, 0.9).unwrap();
        assert!((b.cx + b.w / 2.0 - 1.0).abs() < 1e-12);
        assert!((b.cx - b.w / 2.0 - 0.89).abs() < 1e-12);
        assert!(b.is_valid());
    }

    #[test]
    fn coordinate_beyond_tolerance_rejected() {
        assert!(BoundingBox::clamped(1.01, 0.5, 0.2, 0.2, 0.9).is_err());
        assert!(BoundingBox::clamped(0.5, 0.5, 0.0, 0.2, 0.9).is_err());
        assert!(BoundingBox::clamped(1.0 + 5e-7, 0.5, 0.2, 0.2, 0.9).is_ok());
    }

    #[test]
    fn frame_key_parses_ids_with_slashes() {
        let k = FrameKey::parse("site/a/17").unwrap();
        assert_eq!(k, FrameKey::new("site/a", 17));
        assert_eq!(k.to_string(), "site/a/17");
        assert!(FrameKey::parse("noindex").is_none());
    }

    #[test]
    fn candidate_requires_detection_and_score() {
        let mut r = FrameRecord::raw("v", 0);
        assert!(r.advance(FrameStatus::Detected).is_err());
        r.detection = Some(BoundingBox::clamped(0.5, 0.5, 0.2, 0.2, 0.9).unwrap());
        r.advance(FrameStatus::Detected).unwrap();
        assert!(r.advance(FrameStatus::Candidate).is_err());
        r.motion_score = Some(0.3);
        r.advance(FrameStatus::Candidate).unwrap();
        r.advance(FrameStatus::Keyframe).unwrap();
        assert!(r.status.is_terminal());
    }

    fn any_status() -> impl Strategy<Value = FrameStatus> {
        prop_oneof![
            Just(FrameStatus::Raw),
            Just(FrameStatus::Detected),
            Just(FrameStatus::Candidate),
            Just(FrameStatus::Keyframe),
            Just(FrameStatus::DiscardedNoDetection),
            Just(FrameStatus::DiscardedHighMotion),
        ]
    }

    proptest! {
        // Any accepted walk is a prefix of RAW -> DETECTED -> CANDIDATE -> KEYFRAME
        // or ends in a discarded state.
        #[test]
        fn status_walks_follow_lifecycle(steps in proptest::collection::vec(any_status(), 0..8)) {
            let mut r = FrameRecord::raw("v", 0);
            r.detection = Some(BoundingBox { cx: 0.5, cy: 0.5, w: 0.2, h: 0.2, confidence: 0.9 });
            r.motion_score = Some(1.0);
            let mut path = vec![r.status];
            for s in steps {
                if r.advance(s).is_ok() {
                    path.push(s);
                }
            }
            use FrameStatus::*;
            let happy = [Raw, Detected, Candidate, Keyframe];
            let ok = path.iter().zip(happy.iter()).all(|(a, b)| a == b) && path.len() <= 4
                || path == [Raw, DiscardedNoDetection]
                || path == [Raw, Detected, DiscardedHighMotion];
            prop_assert!(ok, "path {:?}", path);
        }
    }
}
