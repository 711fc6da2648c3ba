use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use keyreid::evaluate::Report;
use keyreid::store::read_store;
use keyreid::{FrameRecord, FrameStatus, KeyFrameSet, SelectionKind};
use keyreid_cli::artifacts::{keyframes_file, read_jsonl, FRAMES_FILE, REPORT_JSON, SUMMARY_FILE};
use keyreid_cli::database::{cmd_db_upsert, LabelSource};
use keyreid_cli::synth::{cmd_synth, synth_config_path, ShiftSegment, SynthProfile, SynthTruth};
use keyreid_cli::{cmd_run, extract, matching, select, CliError, RunConfig};
use tempfile::TempDir;

fn small_profile() -> SynthProfile {
    SynthProfile {
        individuals: 3,
        videos_per_individual: 2,
        frames_per_video: 30,
        segments: vec![
            ShiftSegment {
                start: 10,
                end: 14,
                dx: 2,
                dy: 0,
            },
            ShiftSegment {
                start: 22,
                end: 24,
                dx: 0,
                dy: -3,
            },
        ],
        ..SynthProfile::default()
    }
}

fn synth(profile: &SynthProfile) -> (TempDir, SynthTruth, RunConfig) {
    let dir = tempfile::tempdir().unwrap();
    let truth = cmd_synth(profile, dir.path()).unwrap();
    let cfg = RunConfig::load(&synth_config_path(dir.path())).unwrap();
    (dir, truth, cfg)
}

fn frames(cfg: &RunConfig) -> Vec<FrameRecord> {
    read_jsonl(&cfg.output_dir.join(FRAMES_FILE)).unwrap()
}

fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_file() {
            out.insert(
                path.strip_prefix(dir).unwrap().to_path_buf(),
                fs::read(&path).unwrap(),
            );
        }
    }
    out
}

#[test]
fn extract_counts_and_scores_follow_the_script() {
    let (_dir, truth, cfg) = synth(&small_profile());
    assert!(extract::cmd_extract(&cfg).unwrap().is_clean());
    let records = frames(&cfg);
    assert_eq!(records.len(), truth.total_frames);

    for video in &truth.videos {
        let mine: Vec<&FrameRecord> = records
            .iter()
            .filter(|r| r.video_id == video.video_id)
            .collect();
        assert_eq!(mine.len(), video.frame_count);
        let detected = mine.iter().filter(|r| r.detection.is_some()).count();
        let candidates = mine
            .iter()
            .filter(|r| r.status == FrameStatus::Candidate)
            .count();
        assert_eq!(detected, video.detected_frames, "{}", video.video_id);
        assert_eq!(candidates, video.candidate_frames, "{}", video.video_id);

        for r in &mine {
            let score = r.motion_score.unwrap();
            let scripted = video.scripted_scores[r.frame_index];
            assert!(
                (score - scripted).abs() < 0.5,
                "{}: {score} vs {scripted}",
                r.key()
            );
            if r.status == FrameStatus::DiscardedHighMotion {
                assert!(
                    video.moving_frames.contains(&r.frame_index),
                    "{} discarded while still",
                    r.key()
                );
            }
            if r.frame_index < small_profile().lead_in {
                assert_eq!(r.status, FrameStatus::DiscardedNoDetection);
            }
        }
    }

    let summary = fs::read_to_string(cfg.output_dir.join(SUMMARY_FILE)).unwrap();
    let total = summary.lines().last().unwrap();
    assert_eq!(
        total,
        format!(
            "Total,6,{},{},{}",
            truth.total_frames, truth.detected_frames, truth.candidate_frames
        )
    );
}

#[test]
fn detections_pick_the_most_confident_box() {
    let (_dir, _truth, cfg) = synth(&small_profile());
    extract::cmd_extract(&cfg).unwrap();
    // every seventh frame carries a weaker decoy box centred at 0.2
    for r in frames(&cfg)
        .iter()
        .filter(|r| r.frame_index % 7 == 0 && r.detection.is_some())
    {
        let bbox = r.detection.unwrap();
        assert!(bbox.confidence >= 0.9, "{}", r.key());
        assert!((bbox.cx - 0.5).abs() <= 0.1, "{}", r.key());
    }
}

#[test]
fn empty_dataset_extracts_to_zero_totals() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("manifest.json"), "[]").unwrap();
    let cfg = RunConfig {
        dataset_root: dir.path().to_path_buf(),
        output_dir: dir.path().join("out"),
        ..RunConfig::default()
    };
    assert!(extract::cmd_extract(&cfg).unwrap().is_clean());
    assert!(frames(&cfg).is_empty());
    let summary = fs::read_to_string(cfg.output_dir.join(SUMMARY_FILE)).unwrap();
    assert_eq!(summary.lines().last(), Some("Total,0,0,0,0"));
}

#[test]
fn frame_count_mismatch_is_reported() {
    let (dir, truth, cfg) = synth(&small_profile());
    let victim = &truth.videos[0].video_id;
    fs::remove_file(dir.path().join(victim).join("frame_000003.png")).unwrap();
    match extract::cmd_extract(&cfg) {
        Err(CliError::Core(keyreid::Error::FrameCountMismatch {
            video_id,
            declared,
            found,
        })) => {
            assert_eq!(&video_id, victim);
            assert_eq!((declared, found), (30, 29));
        }
        other => panic!("expected a frame count mismatch, got {other:?}"),
    }
}

#[test]
fn match_before_select_names_the_missing_stage() {
    let (_dir, _truth, cfg) = synth(&small_profile());
    extract::cmd_extract(&cfg).unwrap();
    match matching::cmd_match(&cfg) {
        Err(CliError::MissingPrerequisite { stage, path }) => {
            assert_eq!(stage, "select");
            assert!(
                path.ends_with(keyframes_file(SelectionKind::ALL[0])),
                "{}",
                path.display()
            );
        }
        other => panic!("expected a missing prerequisite, got {other:?}"),
    }
}

#[test]
fn select_before_extract_names_the_missing_stage() {
    let (_dir, _truth, cfg) = synth(&small_profile());
    let err = select::cmd_select(&cfg).unwrap_err();
    assert!(
        matches!(
            err,
            CliError::MissingPrerequisite {
                stage: "extract",
                ..
            }
        ),
        "{err}"
    );
    assert_eq!(err.exit_code(), 1);
}

#[test]
fn full_run_reports_every_method_and_reruns_identically() {
    let (_dir, truth, cfg) = synth(&small_profile());
    let (stages, report) = cmd_run(&cfg).unwrap();
    assert!(stages.iter().all(|s| s.is_clean()));
    assert_eq!(report.per_method.len(), 6);

    let on_disk: Report =
        serde_json::from_slice(&fs::read(cfg.output_dir.join(REPORT_JSON)).unwrap()).unwrap();
    assert_eq!(on_disk, report);

    for kind in SelectionKind::ALL {
        let m = &report.per_method[kind.name()];
        let sets: Vec<KeyFrameSet> =
            read_jsonl(&cfg.output_dir.join(keyframes_file(kind))).unwrap();
        assert_eq!(sets.len(), truth.videos.len());
        let total: usize = sets.iter().map(|s| s.key_frame_indices.len()).sum();
        assert_eq!(m.keyframe_count, total, "{kind}");
        assert_eq!(m.video_count, truth.videos.len());
        assert_eq!(m.image_accuracy, 1.0, "{kind}");
        let v = &m.video_accuracy;
        assert_eq!((v.t60, v.t80, v.vote), (1.0, 1.0, 1.0), "{kind}");
    }
    // one test per pair of methods
    assert_eq!(report.mcnemar.len(), 15);

    let first = snapshot(&cfg.output_dir);
    cmd_run(&cfg).unwrap();
    assert_eq!(snapshot(&cfg.output_dir), first);
}

#[test]
fn random_baselines_depend_only_on_the_seed() {
    let (_dir, _truth, cfg) = synth(&small_profile());
    extract::cmd_extract(&cfg).unwrap();
    let file = cfg.output_dir.join(keyframes_file(SelectionKind::Random5));

    select::cmd_select(&cfg).unwrap();
    let first = fs::read(&file).unwrap();
    select::cmd_select(&cfg).unwrap();
    assert_eq!(fs::read(&file).unwrap(), first);

    let reseeded = cfg.clone().with_seed(7);
    select::cmd_select(&reseeded).unwrap();
    let sets: Vec<KeyFrameSet> = read_jsonl(&file).unwrap();
    assert!(sets
        .iter()
        .all(|s| s.seed == 7 && s.key_frame_indices.len() == 5));
    assert_ne!(fs::read(&file).unwrap(), first);
}

#[test]
fn noiseless_embeddings_sit_on_their_centers() {
    let profile = SynthProfile {
        noise_sigma: 0.0,
        ..small_profile()
    };
    let (dir, truth, _cfg) = synth(&profile);
    let store = read_store(&dir.path().join("embeddings.emb")).unwrap();
    assert_eq!(
        store.len(),
        truth.videos.len() * (profile.frames_per_video - profile.lead_in)
    );
    for r in store.records() {
        let g: usize = r.video_id[3..5].parse().unwrap();
        let hot: Vec<usize> = r
            .vector
            .iter()
            .enumerate()
            .filter(|(_, &x)| x != 0.0)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(hot, vec![g], "{}", r.key());
        assert_eq!(r.vector[g], 1.0);
    }
}

#[test]
fn db_upsert_adds_key_frames_once() {
    let (_dir, truth, cfg) = synth(&small_profile());
    let (_stages, report) = cmd_run(&cfg).unwrap();
    let kind = SelectionKind::Kmedoids;

    cmd_db_upsert(&cfg, kind, LabelSource::Vote).unwrap();
    let db = read_store(&cfg.database_path()).unwrap();
    assert_eq!(db.len(), report.per_method[kind.name()].keyframe_count);
    let labels: BTreeMap<&str, &str> = truth
        .videos
        .iter()
        .map(|v| (v.video_id.as_str(), v.label.as_str()))
        .collect();
    for r in db.records() {
        assert_eq!(
            r.label.as_deref(),
            Some(labels[r.video_id.as_str()]),
            "{}",
            r.key()
        );
    }

    cmd_db_upsert(&cfg, kind, LabelSource::Truth).unwrap();
    assert_eq!(read_store(&cfg.database_path()).unwrap(), db);
}
