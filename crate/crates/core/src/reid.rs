//! Cosine-similarity matching of key-frame embeddings against a labelled
//! gallery, excluding frames from the query's own video.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{EmbeddingRecord, FrameKey};
use crate::scalar::Scalar;
use crate::store::EmbeddingStore;

/// Best gallery match for one query frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub query: FrameKey,
    pub matched: FrameKey,
    pub similarity: f64,
    pub predicted_label: String,
    pub true_label: Option<String>,
}

impl MatchResult {
    pub fn is_correct(&self) -> bool {
        self.true_label.as_deref() == Some(self.predicted_label.as_str())
    }
}

/// Cosine of the angle between `a` and `b`, clamped to `[-1, 1]`.
pub fn cosine_similarity<T: Scalar>(a: &[T], b: &[T]) -> Result<T> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let (mut dot, mut na, mut nb) = (T::zero(), T::zero(), T::zero());
    for (&x, &y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na <= T::zero() || nb <= T::zero() {
        return Err(Error::ZeroVector);
    }
    let s = dot / (na.sqrt() * nb.sqrt());
    Ok(s.max(-T::one()).min(T::one()))
}

fn widen(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| f64::from(x)).collect()
}

/// Pre-normalized snapshot of the labelled records of a store.
#[derive(Debug, Clone)]
pub struct Gallery {
    dim: usize,
    entries: Vec<GalleryEntry>,
}

#[derive(Debug, Clone)]
struct GalleryEntry {
    key: FrameKey,
    label: String,
    unit: Vec<f64>,
}

impl Gallery {
    /// Unlabelled records are skipped.
    pub fn new(store: &EmbeddingStore) -> Result<Self> {
        let entries = store
            .records()
            .iter()
            .filter_map(|r| r.label.as_ref().map(|l| (r, l)))
            .map(|(r, label)| {
                let v = widen(&r.vector);
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm <= 0.0 {
                    return Err(Error::ZeroVector);
                }
                Ok(GalleryEntry {
                    key: r.key(),
                    label: label.clone(),
                    unit: v.into_iter().map(|x| x / norm).collect(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Gallery {
            dim: store.dim(),
            entries,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Highest-similarity labelled record from another video. Exact ties go
    /// to the smallest `(video_id, frame_index)`.
    pub fn best_match(
        &self,
        query: &EmbeddingRecord,
        true_label: Option<&str>,
    ) -> Result<MatchResult> {
        if query.vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: query.vector.len(),
            });
        }
        let q = widen(&query.vector);
        let qn = q.iter().map(|x| x * x).sum::<f64>().sqrt();
        if qn <= 0.0 {
            return Err(Error::ZeroVector);
        }
        let mut best: Option<(f64, &GalleryEntry)> = None;
        for e in self
            .entries
            .iter()
            .filter(|e| e.key.video_id != query.video_id)
        {
            let s = (q.iter().zip(&e.unit).map(|(a, b)| a * b).sum::<f64>() / qn).clamp(-1.0, 1.0);
            let better = match best {
                None => true,
                Some((bs, be)) => s > bs || (s == bs && e.key < be.key),
            };
            if better {
                best = Some((s, e));
            }
        }
        let (similarity, e) = best.ok_or_else(|| Error::NoEligibleMatch {
            video_id: query.video_id.clone(),
            frame_index: query.frame_index,
        })?;
        Ok(MatchResult {
            query: query.key(),
            matched: e.key.clone(),
            similarity,
            predicted_label: e.label.clone(),
            true_label: true_label
                .map(str::to_string)
                .or_else(|| query.label.clone()),
        })
    }
}

/// One-off match of `query` against `gallery`. Build a [`Gallery`] once when
/// matching many queries.
pub fn best_match(query: &EmbeddingRecord, gallery: &EmbeddingStore) -> Result<MatchResult> {
    Gallery::new(gallery)?.best_match(query, None)
}

/// Fraction of correct predictions.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Accuracy {
    pub correct: usize,
    pub total: usize,
}

impl Accuracy {
    pub fn value(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }

    pub fn record(&mut self, correct: bool) {
        self.total += 1;
        self.correct += usize::from(correct);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyTable {
    pub overall: Accuracy,
    pub per_label: BTreeMap<String, Accuracy>,
}

/// Image-level accuracy overall and grouped by true label.
pub fn image_accuracy(results: &[MatchResult]) -> Result<AccuracyTable> {
    if results.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut overall = Accuracy::default();
    let mut per_label: BTreeMap<String, Accuracy> = BTreeMap::new();
    for r in results {
        let label = r.true_label.as_ref().ok_or_else(|| {
            Error::InvalidParameter(format!("match for {} has no true label", r.query))
        })?;
        let ok = r.is_correct();
        overall.record(ok);
        per_label.entry(label.clone()).or_default().record(ok);
    }
    Ok(AccuracyTable { overall, per_label })
}

#[derive(Serialize, Deserialize)]
struct MatchRow {
    query_video: String,
    query_frame: usize,
    match_video: String,
    match_frame: usize,
    similarity: f64,
    predicted_label: String,
    true_label: Option<String>,
}

pub fn write_matches<W: Write>(writer: W, results: &[MatchResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in results {
        w.serialize(MatchRow {
            query_video: r.query.video_id.clone(),
            query_frame: r.query.frame_index,
            match_video: r.matched.video_id.clone(),
            match_frame: r.matched.frame_index,
            similarity: r.similarity,
            predicted_label: r.predicted_label.clone(),
            true_label: r.true_label.clone(),
        })
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io("matches", e))?;
    Ok(())
}

pub fn read_matches<R: std::io::Read>(reader: R) -> Result<Vec<MatchResult>> {
    let mut r = csv::Reader::from_reader(reader);
    r.deserialize::<MatchRow>()
        .enumerate()
        .map(|(i, row)| {
            let row = row.map_err(|e| Error::Malformed {
                what: "matches csv",
                path: "matches".into(),
                line: i + 2,
                message: e.to_string(),
            })?;
            Ok(MatchResult {
                query: FrameKey::new(row.query_video, row.query_frame),
                matched: FrameKey::new(row.match_video, row.match_frame),
                similarity: row.similarity,
                predicted_label: row.predicted_label,
                true_label: row.true_label.filter(|s| !s.is_empty()),
            })
        })
        .collect()
}
