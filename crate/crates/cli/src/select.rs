//! Select stage: key-frame selection for every configured method.

use std::collections::BTreeMap;

use keyreid::keyframes::select_keyframes;
use keyreid::store::read_store;
use keyreid::{
    EmbeddingStore, FrameKey, FrameRecord, FrameStatus, KeyFrameSet, SelectConfig, SelectionMethod,
};
use ndarray::Array2;
use rayon::prelude::*;

use crate::artifacts::{keyframes_file, read_jsonl, require, write_jsonl, FRAMES_FILE};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::StageReport;

/// Candidate frame indices per video, in frame order. Videos whose frames
/// were all discarded map to an empty list.
pub fn candidates_by_video(frames: &[FrameRecord]) -> BTreeMap<String, Vec<usize>> {
    let mut out: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for f in frames {
        let entry = out.entry(f.video_id.clone()).or_default();
        if f.status == FrameStatus::Candidate {
            entry.push(f.frame_index);
        }
    }
    for v in out.values_mut() {
        v.sort_unstable();
    }
    out
}

/// Gathers one row per candidate frame from the store.
pub fn embedding_matrix(
    store: &EmbeddingStore,
    video_id: &str,
    frames: &[usize],
) -> CliResult<Array2<f64>> {
    let mut m = Array2::zeros((frames.len(), store.dim()));
    for (row, &f) in frames.iter().enumerate() {
        let key = FrameKey::new(video_id, f);
        let rec = store.get(&key).ok_or_else(|| {
            CliError::format("embeddings", format!("no embedding for candidate {key}"))
        })?;
        for (dst, &v) in m.row_mut(row).iter_mut().zip(&rec.vector) {
            *dst = f64::from(v);
        }
    }
    Ok(m)
}

pub fn select_video(
    store: &EmbeddingStore,
    video_id: &str,
    frames: &[usize],
    method: &SelectionMethod,
    cfg: &SelectConfig,
) -> CliResult<KeyFrameSet> {
    let points = embedding_matrix(store, video_id, frames)?;
    Ok(select_keyframes(
        video_id,
        frames,
        points.view(),
        method,
        cfg,
    )?)
}

pub fn cmd_select(cfg: &RunConfig) -> CliResult<StageReport> {
    let frames_path = require(&cfg.output_dir.join(FRAMES_FILE), "extract")?;
    let frames: Vec<FrameRecord> = read_jsonl(&frames_path)?;
    let candidates = candidates_by_video(&frames);
    let store = read_store(&cfg.embeddings_path())?;
    let select_cfg = cfg.select_config();

    let mut report = StageReport::new("select");
    for (video, c) in &candidates {
        if c.is_empty() {
            log::warn!("{video}: no candidate frames, no key frames selected");
        }
    }
    for method in &cfg.methods {
        let results: Vec<(&String, CliResult<KeyFrameSet>)> = candidates
            .par_iter()
            .filter(|(_, c)| !c.is_empty())
            .map(|(video, c)| (video, select_video(&store, video, c, method, &select_cfg)))
            .collect();
        let mut sets = Vec::with_capacity(results.len());
        for (video, res) in results {
            match res {
                Ok(set) => sets.push(set),
                Err(e) => report.fail(&format!("{video} ({})", method.kind), e),
            }
        }
        let total: usize = sets.iter().map(|s| s.key_frame_indices.len()).sum();
        log::info!(
            "{}: {total} key frames over {} videos",
            method.kind,
            sets.len()
        );
        write_jsonl(&cfg.output_dir.join(keyframes_file(method.kind)), &sets)?;
    }
    report.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use keyreid::EmbeddingRecord;

    #[test]
    fn groups_candidates_by_video() {
        let mut frames = Vec::new();
        for (v, i, s) in [
            ("b", 3, FrameStatus::Candidate),
            ("a", 0, FrameStatus::DiscardedNoDetection),
            ("b", 1, FrameStatus::Candidate),
            ("b", 2, FrameStatus::DiscardedHighMotion),
        ] {
            let mut r = FrameRecord::raw(v, i);
            r.status = s;
            frames.push(r);
        }
        let c = candidates_by_video(&frames);
        assert_eq!(c["a"], Vec::<usize>::new());
        assert_eq!(c["b"], vec![1, 3]);
    }

    #[test]
    fn missing_embedding_is_reported() {
        let store = EmbeddingStore::new("e", 2)
            .unwrap()
            .upserted([EmbeddingRecord {
                video_id: "v".into(),
                frame_index: 0,
                encoder_id: "e".into(),
                vector: vec![1.0, 2.0],
                label: None,
            }])
            .unwrap();
        assert_eq!(embedding_matrix(&store, "v", &[0]).unwrap()[[0, 1]], 2.0);
        let err = embedding_matrix(&store, "v", &[0, 5]).unwrap_err();
        assert!(err.to_string().contains("v/5"));
    }
}
