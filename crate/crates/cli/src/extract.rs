//! Extract stage: motion scoring, detection filtering and blur removal.

use std::collections::BTreeMap;
use std::path::Path;

use keyreid::model::{
    crop_frame, frame_path, load_detections, load_gray_frame, load_manifest, BoundingBox,
};
use keyreid::motion::{blur_filter, write_motion_scores, MotionScorer};
use keyreid::{FlowParams, FrameRecord, FrameStatus, VideoManifest};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifacts::{
    write_atomic, write_jsonl, CROPS_DIR, FRAMES_FILE, MOTION_FILE, SUMMARY_FILE,
};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::StageReport;

/// Frame counts for one video or one group of videos.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameCounts {
    pub videos: usize,
    pub total_frames: usize,
    pub detected_frames: usize,
    pub candidate_frames: usize,
}

impl FrameCounts {
    pub fn of(records: &[FrameRecord]) -> Self {
        FrameCounts {
            videos: 1,
            total_frames: records.len(),
            detected_frames: records.iter().filter(|r| r.detection.is_some()).count(),
            candidate_frames: records
                .iter()
                .filter(|r| r.status == FrameStatus::Candidate)
                .count(),
        }
    }

    fn add(&mut self, other: &FrameCounts) {
        self.videos += other.videos;
        self.total_frames += other.total_frames;
        self.detected_frames += other.detected_frames;
        self.candidate_frames += other.candidate_frames;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub band: String,
    pub videos: usize,
    pub total_frames: usize,
    pub detected_frames: usize,
    pub low_motion_frames: usize,
}

/// Groups per-video counts by label (unlabelled videos under `""`) and
/// appends a `Total` row.
pub fn summarize<'a, I>(per_video: I) -> Vec<SummaryRow>
where
    I: IntoIterator<Item = (Option<&'a str>, FrameCounts)>,
{
    let mut groups: BTreeMap<String, FrameCounts> = BTreeMap::new();
    let mut total = FrameCounts::default();
    for (label, counts) in per_video {
        groups
            .entry(label.unwrap_or("").to_string())
            .or_default()
            .add(&counts);
        total.add(&counts);
    }
    let row = |band: String, c: FrameCounts| SummaryRow {
        band,
        videos: c.videos,
        total_frames: c.total_frames,
        detected_frames: c.detected_frames,
        low_motion_frames: c.candidate_frames,
    };
    groups
        .into_iter()
        .map(|(b, c)| row(b, c))
        .chain(std::iter::once(row("Total".into(), total)))
        .collect()
}

pub fn summary_csv(rows: &[SummaryRow]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)
            .map_err(|e| CliError::format(SUMMARY_FILE, e))?;
    }
    w.into_inner()
        .map_err(|e| CliError::format(SUMMARY_FILE, e))
}

/// Scores, labels and filters every frame of one video.
pub fn extract_video(
    video: &VideoManifest,
    detections: Option<&BTreeMap<usize, BoundingBox>>,
    flow: &FlowParams,
    blur_fraction: f64,
) -> keyreid::Result<Vec<FrameRecord>> {
    let mut scorer = MotionScorer::<f64>::new(*flow);
    let mut detected = Vec::new();
    let mut records = Vec::with_capacity(video.frame_count);
    for index in 0..video.frame_count {
        let gray = load_gray_frame::<f64>(&frame_path(&video.frame_dir, index))?;
        let score = scorer.push(gray)?;
        let mut rec = FrameRecord::raw(video.video_id.clone(), index);
        rec.motion_score = Some(score);
        match detections.and_then(|d| d.get(&index)) {
            Some(b) => {
                rec.detection = Some(*b);
                rec.advance(FrameStatus::Detected)?;
                detected.push(rec);
            }
            None => {
                rec.advance(FrameStatus::DiscardedNoDetection)?;
                records.push(rec);
            }
        }
    }
    let split = blur_filter(detected, blur_fraction)?;
    records.extend(split.retained);
    records.extend(split.discarded);
    records.sort_by_key(|r| r.frame_index);
    Ok(records)
}

fn write_crops(video: &VideoManifest, records: &[FrameRecord], out: &Path) -> CliResult<()> {
    let dir = out.join(CROPS_DIR).join(&video.video_id);
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    for r in records
        .iter()
        .filter(|r| r.status == FrameStatus::Candidate)
    {
        let src = frame_path(&video.frame_dir, r.frame_index);
        let img = image::open(&src)
            .map_err(|e| CliError::format(&src, e))?
            .to_rgb8();
        let bbox = r.detection.expect("candidate has a detection");
        let crop = crop_frame(&img, &bbox, &r.key().to_string())?;
        let dst = keyreid::model::frame_path(&dir, r.frame_index);
        crop.save(&dst).map_err(|e| CliError::format(&dst, e))?;
    }
    Ok(())
}

pub fn cmd_extract(cfg: &RunConfig) -> CliResult<StageReport> {
    let videos = load_manifest(&cfg.dataset_root)?;
    let det_path = cfg.detections_path();
    let detections = if videos.is_empty() && !det_path.exists() {
        Default::default()
    } else {
        load_detections(&det_path, cfg.confidence_floor)?
    };
    for v in detections.keys() {
        if !videos.iter().any(|m| &m.video_id == v) {
            log::warn!("detections for unknown video {v} ignored");
        }
    }

    let results: Vec<(usize, CliResult<Vec<FrameRecord>>)> = videos
        .par_iter()
        .enumerate()
        .map(|(i, video)| {
            let res = extract_video(
                video,
                detections.get(&video.video_id),
                &cfg.flow,
                cfg.blur_fraction,
            )
            .map_err(CliError::from)
            .and_then(|recs| {
                if cfg.write_crops {
                    write_crops(video, &recs, &cfg.output_dir)?;
                }
                Ok(recs)
            });
            (i, res)
        })
        .collect();

    let mut report = StageReport::new("extract");
    let mut all = Vec::new();
    let mut per_video = Vec::new();
    for (i, res) in results {
        let video = &videos[i];
        match res {
            Ok(recs) => {
                let c = FrameCounts::of(&recs);
                log::info!(
                    "{}: {} frames, {} detected, {} candidates",
                    video.video_id,
                    c.total_frames,
                    c.detected_frames,
                    c.candidate_frames
                );
                per_video.push((video.true_label.as_deref(), c));
                all.extend(recs);
            }
            Err(e) => report.fail(&video.video_id, e),
        }
    }

    let out = &cfg.output_dir;
    write_jsonl(&out.join(FRAMES_FILE), &all)?;
    let scores: Vec<(String, usize, f64)> = all
        .iter()
        .map(|r| {
            (
                r.video_id.clone(),
                r.frame_index,
                r.motion_score.unwrap_or(0.0),
            )
        })
        .collect();
    let mut buf = Vec::new();
    write_motion_scores(&mut buf, &scores)?;
    write_atomic(&out.join(MOTION_FILE), &buf)?;
    write_atomic(
        &out.join(SUMMARY_FILE),
        &summary_csv(&summarize(per_video))?,
    )?;
    report.finish()
}
