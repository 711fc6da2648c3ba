//! Stage artifact names and atomic file output.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use keyreid::SelectionKind;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{CliError, CliResult};

pub const FRAMES_FILE: &str = "frames.jsonl";
pub const MOTION_FILE: &str = "motion_scores.csv";
pub const SUMMARY_FILE: &str = "extract_summary.csv";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";
pub const CROPS_DIR: &str = "crops";

pub fn keyframes_file(kind: SelectionKind) -> String {
    format!("keyframes_{kind}.jsonl")
}

pub fn matches_file(kind: SelectionKind) -> String {
    format!("matches_{kind}.csv")
}

pub fn decisions_file(kind: SelectionKind) -> String {
    format!("decisions_{kind}.csv")
}

/// Writes `bytes` to a temporary file next to `path`, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.as_file()
        .sync_all()
        .map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> CliResult<()> {
    let mut buf = Vec::new();
    for row in rows {
        serde_json::to_writer(&mut buf, row).map_err(|e| CliError::format(path, e))?;
        buf.push(b'\n');
    }
    write_atomic(path, &buf)
}

/// Reads a stage artifact, naming the stage that produces it when absent.
pub fn require(path: &Path, stage: &'static str) -> CliResult<PathBuf> {
    if path.is_file() {
        Ok(path.to_path_buf())
    } else {
        Err(CliError::MissingPrerequisite {
            path: path.to_path_buf(),
            stage,
        })
    }
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> CliResult<Vec<T>> {
    let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row = serde_json::from_str(&line)
            .map_err(|e| CliError::format(path, format!("line {}: {e}", i + 1)))?;
        out.push(row);
    }
    Ok(out)
}
