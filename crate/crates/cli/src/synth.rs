//! Synthetic datasets with known motion, detections and identities.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use image::{GrayImage, Luma};
use keyreid::model::{
    frame_path, write_detections, write_labels, write_manifest, DetectionRow, ManifestEntry,
    LABELS_FILE, MANIFEST_FILE,
};
use keyreid::motion::discard_count;
use keyreid::store::write_store;
use keyreid::{EmbeddingRecord, EmbeddingStore};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifacts::write_atomic;
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const TRUTH_FILE: &str = "truth.json";
pub const CONFIG_FILE: &str = "config.json";

/// Constant per-frame translation applied to frames `start..=end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftSegment {
    pub start: usize,
    pub end: usize,
    pub dx: i32,
    pub dy: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthProfile {
    pub individuals: usize,
    pub videos_per_individual: usize,
    pub frames_per_video: usize,
    pub width: usize,
    pub height: usize,
    /// Leading frames whose only detection falls below the confidence floor.
    pub lead_in: usize,
    pub embedding_dim: usize,
    /// Per-component standard deviation of the embedding noise around each
    /// individual's unit-length center.
    pub noise_sigma: f64,
    pub segments: Vec<ShiftSegment>,
    pub blur_fraction: f64,
    pub encoder_id: String,
    pub seed: u64,
}

impl Default for SynthProfile {
    fn default() -> Self {
        SynthProfile {
            individuals: 7,
            videos_per_individual: 4,
            frames_per_video: 60,
            width: 64,
            height: 64,
            lead_in: 4,
            embedding_dim: 64,
            noise_sigma: 0.005,
            segments: vec![
                ShiftSegment {
                    start: 10,
                    end: 20,
                    dx: 2,
                    dy: 0,
                },
                ShiftSegment {
                    start: 40,
                    end: 45,
                    dx: -1,
                    dy: 3,
                },
            ],
            blur_fraction: 0.2,
            encoder_id: "synthetic-basis".into(),
            seed: 42,
        }
    }
}

impl SynthProfile {
    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(format!("synth profile: {m}")));
        if self.individuals == 0 || self.videos_per_individual == 0 || self.frames_per_video == 0 {
            return bad(
                "individuals, videos_per_individual and frames_per_video must be positive".into(),
            );
        }
        if self.individuals > self.embedding_dim {
            return bad(format!(
                "{} individuals need embedding_dim >= {}",
                self.individuals, self.individuals
            ));
        }
        if self.width < 16 || self.height < 16 {
            return bad(format!(
                "frames must be at least 16x16, got {}x{}",
                self.width, self.height
            ));
        }
        if self.lead_in >= self.frames_per_video {
            return bad("lead_in must leave at least one detected frame".into());
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return bad(format!(
                "noise_sigma {} must be finite and >= 0",
                self.noise_sigma
            ));
        }
        if !(0.0..1.0).contains(&self.blur_fraction) {
            return bad(format!(
                "blur_fraction {} not in [0, 1)",
                self.blur_fraction
            ));
        }
        for s in &self.segments {
            if s.start == 0 || s.start > s.end || s.end >= self.frames_per_video {
                return bad(format!(
                    "segment {}..={} outside frames 1..{}",
                    s.start, s.end, self.frames_per_video
                ));
            }
            if s.dx.unsigned_abs() as usize * 2 >= self.width
                || s.dy.unsigned_abs() as usize * 2 >= self.height
            {
                return bad(format!(
                    "shift ({}, {}) too large for the frame",
                    s.dx, s.dy
                ));
            }
        }
        Ok(())
    }

    pub fn video_count(&self) -> usize {
        self.individuals * self.videos_per_individual
    }

    /// Translation from frame `i - 1` to frame `i`.
    pub fn shift_at(&self, i: usize) -> (i32, i32) {
        self.segments
            .iter()
            .filter(|s| (s.start..=s.end).contains(&i))
            .fold((0, 0), |(x, y), s| (x + s.dx, y + s.dy))
    }
}

pub fn video_id(individual: usize, take: usize) -> String {
    format!("ind{individual:02}-v{take}")
}

pub fn individual_label(individual: usize) -> String {
    format!("ID-{individual:02}")
}

/// Smooth texture built from sinusoids with integer frequencies, so it tiles
/// the frame exactly and wrap-around shifts are pure translations.
pub fn periodic_texture(height: usize, width: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let waves: Vec<(f64, f64, f64, f64)> = (0..12)
        .map(|_| {
            let kx = f64::from(rng.random_range(-6i32..=6));
            let ky = f64::from(rng.random_range(-6i32..=6));
            let kx = if kx == 0.0 && ky == 0.0 { 3.0 } else { kx };
            (
                kx,
                ky,
                rng.random_range(0.0..TAU),
                rng.random_range(0.5..1.0),
            )
        })
        .collect();
    let total: f64 = waves.iter().map(|w| w.3).sum();
    Array2::from_shape_fn((height, width), |(y, x)| {
        let v: f64 = waves
            .iter()
            .map(|&(kx, ky, ph, amp)| {
                amp * (TAU * (kx * x as f64 / width as f64 + ky * y as f64 / height as f64) + ph)
                    .sin()
            })
            .sum();
        0.5 + 0.45 * v / total
    })
}

/// `out(x, y) = src(x - dx, y - dy)`, wrapping at the borders.
pub fn shift_wrap(src: &Array2<f64>, dx: isize, dy: isize) -> Array2<f64> {
    let (h, w) = src.dim();
    Array2::from_shape_fn((h, w), |(y, x)| {
        let sy = (y as isize - dy).rem_euclid(h as isize) as usize;
        let sx = (x as isize - dx).rem_euclid(w as isize) as usize;
        src[[sy, sx]]
    })
}

fn to_png(gray: &Array2<f64>) -> GrayImage {
    let (h, w) = gray.dim();
    GrayImage::from_fn(w as u32, h as u32, |x, y| {
        Luma([(gray[[y as usize, x as usize]] * 255.0)
            .round()
            .clamp(0.0, 255.0) as u8])
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoTruth {
    pub video_id: String,
    pub label: String,
    pub frame_count: usize,
    pub detected_frames: usize,
    pub candidate_frames: usize,
    /// Frames whose scripted translation from the previous frame is nonzero.
    pub moving_frames: Vec<usize>,
    /// Scripted displacement magnitude per frame.
    pub scripted_scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    pub profile: SynthProfile,
    pub videos: Vec<VideoTruth>,
    pub total_frames: usize,
    pub detected_frames: usize,
    pub candidate_frames: usize,
}

fn box_rows(profile: &SynthProfile, video: &str, rng: &mut ChaCha8Rng) -> Vec<DetectionRow> {
    let mut rows = Vec::new();
    for i in 0..profile.frames_per_video {
        let row = |bbox: [f64; 4], confidence: f64| DetectionRow {
            video_id: video.to_string(),
            frame_index: i,
            bbox,
            confidence,
            class: "kaka".into(),
        };
        if i < profile.lead_in {
            rows.push(row([0.5, 0.5, 0.3, 0.3], rng.random_range(0.3..0.7)));
            continue;
        }
        let cx = rng.random_range(0.4..0.6);
        let cy = rng.random_range(0.4..0.6);
        rows.push(row([cx, cy, 0.5, 0.5], rng.random_range(0.9..1.0)));
        if i % 7 == 0 {
            // a weaker second box; the stronger one must win
            rows.push(row([0.2, 0.2, 0.2, 0.2], rng.random_range(0.8..0.85)));
        }
    }
    rows
}

type VideoOutput = (VideoTruth, Vec<DetectionRow>, Vec<EmbeddingRecord>);

/// Writes a synthetic dataset under `root`: frames, `manifest.json`,
/// `labels.csv`, `detections.jsonl`, `embeddings.emb`, `truth.json` and a
/// ready-to-run `config.json`.
pub fn cmd_synth(profile: &SynthProfile, root: &Path) -> CliResult<SynthTruth> {
    profile.validate()?;
    std::fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
    let root = root.canonicalize().map_err(|e| CliError::io(root, e))?;
    let noise =
        Normal::new(0.0, profile.noise_sigma).map_err(|e| CliError::Config(e.to_string()))?;

    let videos: Vec<(usize, usize)> = (0..profile.individuals)
        .flat_map(|g| (0..profile.videos_per_individual).map(move |t| (g, t)))
        .collect();

    let scripted: Vec<(i32, i32)> = (0..profile.frames_per_video)
        .map(|i| profile.shift_at(i))
        .collect();

    let per_video: Vec<CliResult<VideoOutput>> = videos
        .par_iter()
        .enumerate()
        .map(|(n, &(g, t))| {
            let vid = video_id(g, t);
            let mut rng = ChaCha8Rng::seed_from_u64(
                profile.seed.wrapping_mul(1_000_003).wrapping_add(n as u64),
            );
            let texture = periodic_texture(profile.height, profile.width, rng.random());
            let dir = root.join(&vid);
            std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
            let (mut ox, mut oy) = (0isize, 0isize);
            for (i, &(dx, dy)) in scripted.iter().enumerate() {
                ox += dx as isize;
                oy += dy as isize;
                let path = frame_path(&dir, i);
                to_png(&shift_wrap(&texture, ox, oy))
                    .save(&path)
                    .map_err(|e| CliError::format(&path, e))?;
            }
            let detections = box_rows(profile, &vid, &mut rng);
            let embeddings = (profile.lead_in..profile.frames_per_video)
                .map(|i| {
                    let vector = (0..profile.embedding_dim)
                        .map(|d| (if d == g { 1.0 } else { 0.0 } + noise.sample(&mut rng)) as f32)
                        .collect();
                    EmbeddingRecord {
                        video_id: vid.clone(),
                        frame_index: i,
                        encoder_id: profile.encoder_id.clone(),
                        vector,
                        label: None,
                    }
                })
                .collect();
            let detected = profile.frames_per_video - profile.lead_in;
            let truth = VideoTruth {
                video_id: vid,
                label: individual_label(g),
                frame_count: profile.frames_per_video,
                detected_frames: detected,
                candidate_frames: detected - discard_count(detected, profile.blur_fraction),
                moving_frames: scripted
                    .iter()
                    .enumerate()
                    .filter(|(_, &s)| s != (0, 0))
                    .map(|(i, _)| i)
                    .collect(),
                scripted_scores: scripted
                    .iter()
                    .map(|&(x, y)| f64::from(x).hypot(f64::from(y)))
                    .collect(),
            };
            Ok((truth, detections, embeddings))
        })
        .collect();

    let mut truths = Vec::new();
    let mut detections = Vec::new();
    let mut store = EmbeddingStore::new(profile.encoder_id.clone(), profile.embedding_dim)?;
    for item in per_video {
        let (truth, dets, embs) = item?;
        truths.push(truth);
        detections.extend(dets);
        store.upsert(embs)?;
    }

    let manifest: Vec<ManifestEntry> = truths
        .iter()
        .map(|t| ManifestEntry {
            video_id: t.video_id.clone(),
            fps: 25.0,
            frame_count: t.frame_count,
        })
        .collect();
    write_manifest(&root.join(MANIFEST_FILE), &manifest)?;
    let labels: BTreeMap<String, String> = truths
        .iter()
        .map(|t| (t.video_id.clone(), t.label.clone()))
        .collect();
    write_labels(&root.join(LABELS_FILE), &labels)?;
    write_detections(&root.join("detections.jsonl"), &detections)?;
    write_store(&store, &root.join("embeddings.emb"))?;

    let truth = SynthTruth {
        profile: profile.clone(),
        total_frames: truths.iter().map(|t| t.frame_count).sum(),
        detected_frames: truths.iter().map(|t| t.detected_frames).sum(),
        candidate_frames: truths.iter().map(|t| t.candidate_frames).sum(),
        videos: truths,
    };
    let json = serde_json::to_vec_pretty(&truth).map_err(|e| CliError::format(TRUTH_FILE, e))?;
    write_atomic(&root.join(TRUTH_FILE), &json)?;

    let config = RunConfig {
        dataset_root: root.clone(),
        dataset_id: Some("synthetic".into()),
        output_dir: root.join("out"),
        blur_fraction: profile.blur_fraction,
        seed: profile.seed,
        ..RunConfig::default()
    }
    .with_seed(profile.seed);
    let json = serde_json::to_vec_pretty(&config).map_err(|e| CliError::format(CONFIG_FILE, e))?;
    write_atomic(&root.join(CONFIG_FILE), &json)?;
    Ok(truth)
}

pub fn synth_config_path(root: &Path) -> PathBuf {
    root.join(CONFIG_FILE)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_profile_is_valid() {
        let p = SynthProfile::default();
        p.validate().unwrap();
        assert_eq!(p.video_count(), 28);
        assert_eq!(p.video_count() * p.frames_per_video, 1680);
        assert_eq!(p.shift_at(10), (2, 0));
        assert_eq!(p.shift_at(20), (2, 0));
        assert_eq!(p.shift_at(21), (0, 0));
        assert_eq!(p.shift_at(42), (-1, 3));
    }

    #[test]
    fn invalid_profiles_are_config_errors() {
        let cases = [
            SynthProfile {
                individuals: 0,
                ..SynthProfile::default()
            },
            SynthProfile {
                width: 8,
                ..SynthProfile::default()
            },
            SynthProfile {
                noise_sigma: -1.0,
                ..SynthProfile::default()
            },
            SynthProfile {
                lead_in: 60,
                ..SynthProfile::default()
            },
            SynthProfile {
                individuals: 70,
                ..SynthProfile::default()
            },
            SynthProfile {
                segments: vec![ShiftSegment {
                    start: 0,
                    end: 3,
                    dx: 1,
                    dy: 0,
                }],
                ..SynthProfile::default()
            },
        ];
        for p in cases {
            assert_eq!(p.validate().unwrap_err().exit_code(), 2);
        }
    }

    #[test]
    fn texture_tiles_exactly() {
        let t = periodic_texture(32, 32, 3);
        let back = shift_wrap(&shift_wrap(&t, 5, -7), -5, 7);
        assert_eq!(back, t);
        assert!(t.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }
}
