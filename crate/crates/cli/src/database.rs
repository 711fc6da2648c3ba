//! Gallery update: add labelled key-frame embeddings to the gallery.

use std::collections::BTreeMap;

use clap::ValueEnum;
use keyreid::evaluate::DecisionRule;
use keyreid::store::read_store;
use keyreid::{EmbeddingStore, SelectionKind};

use crate::artifacts::write_atomic;
use crate::config::RunConfig;
use crate::error::CliResult;
use crate::evaluation::{decide_all, load_matches};
use crate::matching::{dataset_labels, key_frame_records, load_keyframes};
use crate::StageReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum LabelSource {
    /// Label each video with its majority-vote decision; unidentified videos are skipped.
    #[default]
    Vote,
    /// Use the labels from `labels.csv`.
    Truth,
}

/// Labels to store per video for the chosen source.
pub fn upsert_labels(
    cfg: &RunConfig,
    kind: SelectionKind,
    source: LabelSource,
) -> CliResult<BTreeMap<String, String>> {
    let truth = dataset_labels(&cfg.dataset_root)?;
    match source {
        LabelSource::Truth => Ok(truth),
        LabelSource::Vote => {
            let matches = load_matches(cfg, kind)?;
            let decisions = decide_all(kind.name(), &truth, &matches)?;
            Ok(decisions
                .into_iter()
                .filter(|d| d.rule == DecisionRule::Vote)
                .filter_map(|d| d.decided_label.map(|l| (d.video_id, l)))
                .collect())
        }
    }
}

pub fn cmd_db_upsert(
    cfg: &RunConfig,
    kind: SelectionKind,
    source: LabelSource,
) -> CliResult<StageReport> {
    let labels = upsert_labels(cfg, kind, source)?;
    let embeddings = read_store(&cfg.embeddings_path())?;
    let sets: Vec<_> = load_keyframes(cfg, kind)?
        .into_iter()
        .filter(|s| labels.contains_key(&s.video_id))
        .collect();
    let records = key_frame_records(&sets, &embeddings, &labels)?;

    let db_path = cfg.database_path();
    let mut db = if db_path.is_file() {
        read_store(&db_path)?
    } else {
        EmbeddingStore::new(embeddings.encoder_id(), embeddings.dim())?
    };
    let before = db.len();
    let n = records.len();
    db.upsert(records)?;
    log::info!(
        "{}: upserted {n} key frames from {} videos ({} new)",
        db_path.display(),
        sets.len(),
        db.len() - before
    );
    write_atomic(&db_path, &db.to_bytes()?)?;
    StageReport::new("db upsert").finish()
}
