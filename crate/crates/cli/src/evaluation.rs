//! Evaluate stage: video-level decisions, accuracy tables and method comparison.

use std::collections::BTreeMap;

use keyreid::evaluate::{
    decide_video, pairwise_significance, video_accuracy, write_report_csv, DecisionRule,
    MethodReport, Report, VideoAccuracySummary, VideoDecision,
};
use keyreid::reid::{image_accuracy, read_matches};
use keyreid::{MatchResult, SelectionKind};

use crate::artifacts::{
    decisions_file, matches_file, require, write_atomic, REPORT_CSV, REPORT_JSON,
};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::matching::{dataset_labels, load_keyframes};
use crate::StageReport;

/// Decisions for every labelled video under all three rules. Videos without
/// matches are unidentified.
pub fn decide_all(
    method: &str,
    labels: &BTreeMap<String, String>,
    matches: &[MatchResult],
) -> keyreid::Result<Vec<VideoDecision>> {
    let mut by_video: BTreeMap<&str, Vec<MatchResult>> = BTreeMap::new();
    for m in matches {
        by_video
            .entry(m.query.video_id.as_str())
            .or_default()
            .push(m.clone());
    }
    let mut out = Vec::with_capacity(labels.len() * 3);
    for (video, label) in labels {
        let ms = by_video
            .get(video.as_str())
            .map(Vec::as_slice)
            .unwrap_or(&[]);
        out.extend(decide_video(video, method, label, ms)?);
    }
    Ok(out)
}

fn rule_accuracy(
    decisions: &[VideoDecision],
    rule: DecisionRule,
) -> keyreid::Result<keyreid::reid::AccuracyTable> {
    let subset: Vec<VideoDecision> = decisions
        .iter()
        .filter(|d| d.rule == rule)
        .cloned()
        .collect();
    video_accuracy(&subset)
}

pub fn method_report(
    matches: &[MatchResult],
    decisions: &[VideoDecision],
    keyframe_count: usize,
) -> keyreid::Result<MethodReport> {
    let labelled: Vec<MatchResult> = matches
        .iter()
        .filter(|m| m.true_label.is_some())
        .cloned()
        .collect();
    let image = if labelled.is_empty() {
        None
    } else {
        Some(image_accuracy(&labelled)?)
    };
    let (t60, t80, vote) = if decisions.is_empty() {
        (None, None, None)
    } else {
        (
            Some(rule_accuracy(decisions, DecisionRule::Threshold60)?),
            Some(rule_accuracy(decisions, DecisionRule::Threshold80)?),
            Some(rule_accuracy(decisions, DecisionRule::Vote)?),
        )
    };
    let value =
        |t: &Option<keyreid::reid::AccuracyTable>| t.as_ref().map_or(0.0, |t| t.overall.value());
    let per_label = |t: &Option<keyreid::reid::AccuracyTable>| {
        t.as_ref()
            .map(|t| {
                t.per_label
                    .iter()
                    .map(|(l, a)| (l.clone(), a.value()))
                    .collect()
            })
            .unwrap_or_default()
    };
    Ok(MethodReport {
        image_accuracy: value(&image),
        video_accuracy: VideoAccuracySummary {
            t60: value(&t60),
            t80: value(&t80),
            vote: value(&vote),
        },
        keyframe_count,
        video_count: vote.as_ref().map_or(0, |t| t.overall.total),
        image_accuracy_per_label: per_label(&image),
        vote_accuracy_per_label: per_label(&vote),
    })
}

fn decisions_csv(decisions: &[VideoDecision]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "video_id",
        "method",
        "rule",
        "decided_label",
        "true_label",
        "correct",
    ])
    .map_err(|e| CliError::format("decisions", e))?;
    for d in decisions {
        let rule = match d.rule {
            DecisionRule::Threshold60 => "t60",
            DecisionRule::Threshold80 => "t80",
            DecisionRule::Vote => "vote",
        };
        w.write_record([
            d.video_id.as_str(),
            d.method.as_str(),
            rule,
            d.decided_label.as_deref().unwrap_or(""),
            d.true_label.as_str(),
            if d.correct { "true" } else { "false" },
        ])
        .map_err(|e| CliError::format("decisions", e))?;
    }
    w.into_inner().map_err(|e| CliError::format("decisions", e))
}

pub fn dataset_id(cfg: &RunConfig) -> String {
    cfg.dataset_id.clone().unwrap_or_else(|| {
        cfg.dataset_root
            .canonicalize()
            .ok()
            .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .unwrap_or_default()
    })
}

pub fn load_matches(cfg: &RunConfig, kind: SelectionKind) -> CliResult<Vec<MatchResult>> {
    let path = require(&cfg.output_dir.join(matches_file(kind)), "match")?;
    let file = std::fs::File::open(&path).map_err(|e| CliError::io(&path, e))?;
    Ok(read_matches(file)?)
}

pub fn cmd_evaluate(cfg: &RunConfig) -> CliResult<(StageReport, Report)> {
    let labels = dataset_labels(&cfg.dataset_root)?;
    let mut per_method = BTreeMap::new();
    let mut outcomes = Vec::new();
    for kind in cfg.method_kinds() {
        let matches = load_matches(cfg, kind)?;
        let keyframe_count: usize = load_keyframes(cfg, kind)?
            .iter()
            .map(|s| s.key_frame_indices.len())
            .sum();
        let decisions = decide_all(kind.name(), &labels, &matches)?;
        write_atomic(
            &cfg.output_dir.join(decisions_file(kind)),
            &decisions_csv(&decisions)?,
        )?;
        let report = method_report(&matches, &decisions, keyframe_count)?;
        log::info!(
            "{kind}: image {:.3}, video t60 {:.3} t80 {:.3} vote {:.3}",
            report.image_accuracy,
            report.video_accuracy.t60,
            report.video_accuracy.t80,
            report.video_accuracy.vote
        );
        let vote: BTreeMap<String, bool> = decisions
            .iter()
            .filter(|d| d.rule == DecisionRule::Vote)
            .map(|d| (d.video_id.clone(), d.correct))
            .collect();
        outcomes.push((kind.name().to_string(), vote));
        per_method.insert(kind.name().to_string(), report);
    }
    let significance = pairwise_significance(&outcomes, cfg.alpha)?;
    let report = Report {
        dataset_id: dataset_id(cfg),
        per_method,
        mcnemar: significance.results().iter().map(Into::into).collect(),
    };
    let json = serde_json::to_vec_pretty(&report).map_err(|e| CliError::format(REPORT_JSON, e))?;
    write_atomic(&cfg.output_dir.join(REPORT_JSON), &json)?;
    let mut csv_buf = Vec::new();
    write_report_csv(&mut csv_buf, &report)?;
    write_atomic(&cfg.output_dir.join(REPORT_CSV), &csv_buf)?;
    Ok((StageReport::new("evaluate").finish()?, report))
}
