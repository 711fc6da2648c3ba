use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const LABELS_FILE: &str = "labels.csv";

/// One entry of `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub video_id: String,
    pub fps: f64,
    pub frame_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VideoManifest {
    pub video_id: String,
    pub dataset_id: String,
    pub frame_count: usize,
    pub fps: f64,
    pub true_label: Option<String>,
    pub frame_dir: PathBuf,
}

/// Loads every video listed in `<root>/manifest.json`, attaching labels from
/// `<root>/labels.csv` when that file exists, and checks frame counts on disk.
pub fn load_manifest(dataset_root: &Path) -> Result<Vec<VideoManifest>> {
    let manifest_path = dataset_root.join(MANIFEST_FILE);
    if !manifest_path.is_file() {
        return Err(Error::MissingManifest(manifest_path));
    }
    let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let entries: Vec<ManifestEntry> =
        serde_json::from_str(&text).map_err(|e| Error::Malformed {
            what: "manifest",
            path: manifest_path.clone(),
            line: e.line(),
            message: e.to_string(),
        })?;

    let labels_path = dataset_root.join(LABELS_FILE);
    let labels = if labels_path.is_file() {
        load_labels(&labels_path)?
    } else {
        BTreeMap::new()
    };
    let dataset_id = dataset_root
        .canonicalize()
        .ok()
        .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .unwrap_or_default();

    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(entries.len());
    for entry in entries {
        if !seen.insert(entry.video_id.clone()) {
            return Err(Error::DuplicateVideo(entry.video_id));
        }
        if !(entry.fps.is_finite() && entry.fps > 0.0) {
            return Err(Error::Malformed {
                what: "manifest",
                path: manifest_path.clone(),
                line: 0,
                message: format!("video {}: fps must be positive", entry.video_id),
            });
        }
        let frame_dir = dataset_root.join(&entry.video_id);
        let found = count_frame_files(&frame_dir)?;
        if found != entry.frame_count {
            return Err(Error::FrameCountMismatch {
                video_id: entry.video_id,
                declared: entry.frame_count,
                found,
            });
        }
        out.push(VideoManifest {
            true_label: labels.get(&entry.video_id).cloned(),
            video_id: entry.video_id,
            dataset_id: dataset_id.clone(),
            frame_count: entry.frame_count,
            fps: entry.fps,
            frame_dir,
        });
    }
    Ok(out)
}

fn count_frame_files(dir: &Path) -> Result<usize> {
    if !dir.is_dir() {
        return Ok(0);
    }
    let mut n = 0;
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name();
        let name = name.to_string_lossy();
        if is_frame_file_name(&name) {
            n += 1;
        }
    }
    Ok(n)
}

fn is_frame_file_name(name: &str) -> bool {
    name.strip_prefix("frame_")
        .and_then(|rest| rest.strip_suffix(".png"))
        .is_some_and(|digits| digits.len() == 6 && digits.bytes().all(|b| b.is_ascii_digit()))
}

#[derive(Debug, Serialize, Deserialize)]
struct LabelRow {
    video_id: String,
    label: String,
}

/// Reads `labels.csv` (`video_id,label`). Empty labels mean "unlabelled".
pub fn load_labels(path: &Path) -> Result<BTreeMap<String, String>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let headers = reader.headers().map_err(|e| csv_err(path, e))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["video_id", "label"] {
        return Err(Error::Malformed {
            what: "labels",
            path: path.to_path_buf(),
            line: 1,
            message: "expected header video_id,label".into(),
        });
    }
    let mut out = BTreeMap::new();
    for row in reader.deserialize::<LabelRow>() {
        let row = row.map_err(|e| csv_err(path, e))?;
        if !row.label.is_empty() {
            out.insert(row.video_id, row.label);
        }
    }
    Ok(out)
}

pub fn write_labels(path: &Path, labels: &BTreeMap<String, String>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["video_id", "label"])
        .map_err(|e| csv_err(path, e))?;
    for (video_id, label) in labels {
        w.write_record([video_id, label])
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let text = serde_json::to_string_pretty(entries)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub(crate) fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    Error::Malformed {
        what: "csv",
        path: path.to_path_buf(),
        line,
        message: e.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn touch_frames(dir: &Path, n: usize) {
        fs::create_dir_all(dir).unwrap();
        for i in 0..n {
            fs::write(dir.join(format!("frame_{i:06}.png")), b"").unwrap();
        }
    }

    #[test]
    fn loads_entries_with_labels() {
        let tmp = tempfile::tempdir().unwrap();
        let root = tmp.path();
        let entries: Vec<_> = (0..128)
            .map(|i| ManifestEntry {
                video_id: format!("v{i:03}"),
                fps: 25.0,
                frame_count: 2,
            })
            .collect();
        for e in &entries {
            touch_frames(&root.join(&e.video_id), 2);
        }
        write_manifest(&root.join(MANIFEST_FILE), &entries).unwrap();
        let mut labels = BTreeMap::new();
        labels.insert("v000".to_string(), "WS-P".to_string());
        write_labels(&root.join(LABELS_FILE), &labels).unwrap();

        let videos = load_manifest(root).unwrap();
        assert_eq!(videos.len(), 128);
        assert_eq!(videos[0].true_label.as_deref(), Some("WS-P"));
        assert_eq!(videos[1].true_label, None);
    }

    #[test]
    fn empty_manifest_gives_no_videos() {
        let tmp = tempfile::tempdir().unwrap();
        write_manifest(&tmp.path().join(MANIFEST_FILE), &[]).unwrap();
        assert!(load_manifest(tmp.path()).unwrap().is_empty());
    }

    #[test]
    fn frame_count_mismatch_is_reported() {
        let tmp = tempfile::tempdir().unwrap();
        touch_frames(&tmp.path().join("v1"), 9);
        let entries = [ManifestEntry {
            video_id: "v1".into(),
            fps: 30.0,
            frame_count: 10,
        }];
        write_manifest(&tmp.path().join(MANIFEST_FILE), &entries).unwrap();
        match load_manifest(tmp.path()) {
            Err(Error::FrameCountMismatch {
                declared: 10,
                found: 9,
                ..
            }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_and_missing_manifest() {
        let tmp = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_manifest(tmp.path()),
            Err(Error::MissingManifest(_))
        ));
        let e = ManifestEntry {
            video_id: "v1".into(),
            fps: 30.0,
            frame_count: 0,
        };
        write_manifest(&tmp.path().join(MANIFEST_FILE), &[e.clone(), e]).unwrap();
        assert!(matches!(
            load_manifest(tmp.path()),
            Err(Error::DuplicateVideo(_))
        ));
    }

    #[test]
    fn only_six_digit_pngs_count() {
        assert!(is_frame_file_name("frame_000012.png"));
        assert!(!is_frame_file_name("frame_12.png"));
        assert!(!is_frame_file_name("frame_000012.jpg"));
    }
}
