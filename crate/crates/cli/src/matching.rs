//! Match stage: match every key frame against the key frames of other videos.

use std::collections::BTreeMap;
use std::path::Path;

use keyreid::model::{load_labels, LABELS_FILE};
use keyreid::reid::write_matches;
use keyreid::store::read_store;
use keyreid::{
    EmbeddingRecord, EmbeddingStore, FrameKey, Gallery, KeyFrameSet, MatchResult, SelectionKind,
};
use rayon::prelude::*;

use crate::artifacts::{keyframes_file, matches_file, read_jsonl, require, write_atomic};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::StageReport;

/// `video_id → label` from the dataset's `labels.csv`, empty when absent.
pub fn dataset_labels(dataset_root: &Path) -> CliResult<BTreeMap<String, String>> {
    let path = dataset_root.join(LABELS_FILE);
    if path.is_file() {
        Ok(load_labels(&path)?)
    } else {
        Ok(BTreeMap::new())
    }
}

pub fn load_keyframes(cfg: &RunConfig, kind: SelectionKind) -> CliResult<Vec<KeyFrameSet>> {
    let path = require(&cfg.output_dir.join(keyframes_file(kind)), "select")?;
    read_jsonl(&path)
}

/// Embedding records of every key frame, labelled with their video's label
/// when known.
pub fn key_frame_records(
    sets: &[KeyFrameSet],
    embeddings: &EmbeddingStore,
    labels: &BTreeMap<String, String>,
) -> CliResult<Vec<EmbeddingRecord>> {
    let mut out = Vec::new();
    for set in sets {
        for &f in &set.key_frame_indices {
            let key = FrameKey::new(set.video_id.clone(), f);
            let rec = embeddings.get(&key).ok_or_else(|| {
                CliError::format("embeddings", format!("no embedding for key frame {key}"))
            })?;
            let mut rec = rec.clone();
            if let Some(l) = labels.get(&set.video_id) {
                rec.label = Some(l.clone());
            }
            out.push(rec);
        }
    }
    Ok(out)
}

/// Matches all key frames of one method; the gallery is the union of the
/// labelled key frames.
pub fn match_key_frames(
    records: &[EmbeddingRecord],
    encoder_id: &str,
    dim: usize,
    labels: &BTreeMap<String, String>,
) -> (Vec<MatchResult>, Vec<(FrameKey, keyreid::Error)>) {
    let gallery_store = match EmbeddingStore::new(encoder_id, dim)
        .and_then(|s| s.upserted(records.iter().cloned()))
    {
        Ok(s) => s,
        Err(e) => return (Vec::new(), vec![(FrameKey::new("*", 0), e)]),
    };
    let gallery = match Gallery::new(&gallery_store) {
        Ok(g) => g,
        Err(e) => return (Vec::new(), vec![(FrameKey::new("*", 0), e)]),
    };
    let results: Vec<_> = records
        .par_iter()
        .map(|r| {
            (
                r.key(),
                gallery.best_match(r, labels.get(&r.video_id).map(String::as_str)),
            )
        })
        .collect();
    let mut ok = Vec::with_capacity(results.len());
    let mut failed = Vec::new();
    for (key, res) in results {
        match res {
            Ok(m) => ok.push(m),
            Err(e) => failed.push((key, e)),
        }
    }
    (ok, failed)
}

pub fn cmd_match(cfg: &RunConfig) -> CliResult<StageReport> {
    let labels = dataset_labels(&cfg.dataset_root)?;
    let embeddings = read_store(&cfg.embeddings_path())?;
    let mut report = StageReport::new("match");
    for kind in cfg.method_kinds() {
        let sets = load_keyframes(cfg, kind)?;
        let records = key_frame_records(&sets, &embeddings, &labels)?;
        let (results, failed) =
            match_key_frames(&records, embeddings.encoder_id(), embeddings.dim(), &labels);
        for (key, e) in failed {
            report.fail(&format!("{key} ({kind})"), CliError::from(e));
        }
        let correct = results.iter().filter(|m| m.is_correct()).count();
        log::info!(
            "{kind}: {correct}/{} key frames matched correctly",
            results.len()
        );
        let mut buf = Vec::new();
        write_matches(&mut buf, &results)?;
        write_atomic(&cfg.output_dir.join(matches_file(kind)), &buf)?;
    }
    report.finish()
}
