use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::types::BoundingBox;
use crate::error::{Error, Result};

/// `video_id → frame_index → box`, one box per frame.
pub type Detections = BTreeMap<String, BTreeMap<usize, BoundingBox>>;

/// One line of `detections.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRow {
    pub video_id: String,
    pub frame_index: usize,
    pub bbox: [f64; 4],
    pub confidence: f64,
    #[serde(default = "default_class")]
    pub class: String,
}

fn default_class() -> String {
    "kaka".to_string()
}

pub fn load_detections(path: &Path, confidence_floor: f64) -> Result<Detections> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_detections(BufReader::new(file), path, confidence_floor)
}

/// Parses JSONL detections, clamping boxes and dropping rows below `confidence_floor`.
/// When several rows name the same frame the highest-confidence box is kept.
pub fn parse_detections<R: BufRead>(
    reader: R,
    path: &Path,
    confidence_floor: f64,
) -> Result<Detections> {
    let mut out = Detections::new();
    let mut dropped = 0usize;
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |message: String| Error::Malformed {
            what: "detections",
            path: path.to_path_buf(),
            line: lineno,
            message,
        };
        let row: DetectionRow =
            serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        let [cx, cy, w, h] = row.bbox;
        let bbox = BoundingBox::clamped(cx, cy, w, h, row.confidence)
            .map_err(|e| malformed(e.to_string()))?;
        if row.confidence < confidence_floor {
            dropped += 1;
            continue;
        }
        let frames = out.entry(row.video_id.clone()).or_default();
        match frames.get(&row.frame_index) {
            Some(existing) => {
                log::debug!(
                    "{}/{}: multiple detections, keeping highest confidence",
                    row.video_id,
                    row.frame_index
                );
                if bbox.confidence > existing.confidence {
                    frames.insert(row.frame_index, bbox);
                }
            }
            None => {
                frames.insert(row.frame_index, bbox);
            }
        }
    }
    if dropped > 0 {
        log::debug!(
            "{}: dropped {dropped} detections below floor {confidence_floor}",
            path.display()
        );
    }
    Ok(out)
}

pub fn write_detections(path: &Path, rows: &[DetectionRow]) -> Result<()> {
    let mut buf = Vec::new();
    for row in rows {
        serde_json::to_writer(&mut buf, row)?;
        buf.push(b'\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}
