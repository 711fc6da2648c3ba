use std::fs;
use std::path::{Path, PathBuf};

use keyreid::keyframes::{SelectConfig, UmapParams};
use keyreid::model::DEFAULT_CONFIDENCE_FLOOR;
use keyreid::motion::DEFAULT_BLUR_FRACTION;
use keyreid::{FlowParams, SelectionKind, SelectionMethod};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const DEFAULT_SEED: u64 = 42;

/// Settings for a pipeline run. Mirrors the JSON config file; every field is
/// optional there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset_root: PathBuf,
    /// Defaults to `<dataset_root>/detections.jsonl`.
    pub detections_path: Option<PathBuf>,
    /// Defaults to `<dataset_root>/embeddings.emb`.
    pub embeddings_path: Option<PathBuf>,
    pub dataset_id: Option<String>,
    pub methods: Vec<SelectionMethod>,
    pub blur_fraction: f64,
    pub confidence_floor: f64,
    pub k_min: usize,
    pub k_max: usize,
    pub umap: UmapParams,
    pub flow: FlowParams,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub normalize_embeddings: bool,
    pub write_crops: bool,
    /// Gallery store updated by `db upsert`; defaults to `<output_dir>/gallery.emb`.
    pub database: Option<PathBuf>,
    pub alpha: f64,
    /// Worker threads; 0 means available parallelism.
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset_root: PathBuf::from("."),
            detections_path: None,
            embeddings_path: None,
            dataset_id: None,
            methods: default_methods(DEFAULT_SEED),
            blur_fraction: DEFAULT_BLUR_FRACTION,
            confidence_floor: DEFAULT_CONFIDENCE_FLOOR,
            k_min: 5,
            k_max: 20,
            umap: UmapParams::default(),
            flow: FlowParams::default(),
            seed: DEFAULT_SEED,
            output_dir: PathBuf::from("out"),
            normalize_embeddings: false,
            write_crops: false,
            database: None,
            alpha: keyreid::evaluate::DEFAULT_ALPHA,
            workers: 0,
        }
    }
}

pub fn default_methods(seed: u64) -> Vec<SelectionMethod> {
    SelectionKind::ALL
        .into_iter()
        .map(|kind| SelectionMethod { kind, seed })
        .collect()
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.k_min < 2 || self.k_min > self.k_max {
            return bad(format!(
                "need 2 <= k_min <= k_max, got {}..{}",
                self.k_min, self.k_max
            ));
        }
        if !(0.0..1.0).contains(&self.blur_fraction) {
            return bad(format!(
                "blur_fraction {} not in [0, 1)",
                self.blur_fraction
            ));
        }
        if !(0.0..=1.0).contains(&self.confidence_floor) {
            return bad(format!(
                "confidence_floor {} not in [0, 1]",
                self.confidence_floor
            ));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha {} not in (0, 1)", self.alpha));
        }
        if self.methods.is_empty() {
            return bad("no selection methods configured".into());
        }
        let mut kinds: Vec<SelectionKind> = self.methods.iter().map(|m| m.kind).collect();
        kinds.sort();
        kinds.dedup();
        if kinds.len() != self.methods.len() {
            return bad("a selection method is listed twice".into());
        }
        self.flow
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        if self.umap.n_components == 0 || self.umap.n_neighbors < 2 || self.umap.n_epochs == 0 {
            return bad("umap needs n_components >= 1, n_neighbors >= 2, n_epochs >= 1".into());
        }
        Ok(())
    }

    /// Replaces every method seed, as `--seed` does.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        for m in &mut self.methods {
            m.seed = seed;
        }
        self
    }

    pub fn detections_path(&self) -> PathBuf {
        self.detections_path
            .clone()
            .unwrap_or_else(|| self.dataset_root.join("detections.jsonl"))
    }

    pub fn embeddings_path(&self) -> PathBuf {
        self.embeddings_path
            .clone()
            .unwrap_or_else(|| self.dataset_root.join("embeddings.emb"))
    }

    pub fn database_path(&self) -> PathBuf {
        self.database
            .clone()
            .unwrap_or_else(|| self.output_dir.join("gallery.emb"))
    }

    pub fn select_config(&self) -> SelectConfig {
        SelectConfig {
            k_min: self.k_min,
            k_max: self.k_max,
            umap: self.umap.clone(),
            normalize: self.normalize_embeddings,
        }
    }

    pub fn method_kinds(&self) -> Vec<SelectionKind> {
        self.methods.iter().map(|m| m.kind).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        let cfg: RunConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.methods.len(), 6);
        assert_eq!(cfg.blur_fraction, 0.2);
        assert_eq!(cfg.confidence_floor, 0.8);
        assert_eq!(cfg.umap.n_components, 5);
        cfg.validate().unwrap();
    }

    #[test]
    fn partial_config_and_methods() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{"dataset_root":"data","methods":[{"kind":"random5","seed":3}],"k_max":8}"#,
        )
        .unwrap();
        assert_eq!(
            cfg.methods,
            vec![SelectionMethod {
                kind: SelectionKind::Random5,
                seed: 3
            }]
        );
        assert_eq!(cfg.k_max, 8);
        assert_eq!(
            cfg.detections_path(),
            PathBuf::from("data/detections.jsonl")
        );
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let cases = [
            RunConfig {
                k_min: 1,
                ..RunConfig::default()
            },
            RunConfig {
                k_min: 9,
                k_max: 8,
                ..RunConfig::default()
            },
            RunConfig {
                blur_fraction: 1.0,
                ..RunConfig::default()
            },
            RunConfig {
                methods: vec![],
                ..RunConfig::default()
            },
        ];
        for cfg in cases {
            assert_eq!(cfg.validate().unwrap_err().exit_code(), 2);
        }
        assert!(serde_json::from_str::<RunConfig>(r#"{"bogus":1}"#).is_err());
    }

    #[test]
    fn seed_override_reaches_methods() {
        let cfg = RunConfig::default().with_seed(7);
        assert!(cfg.methods.iter().all(|m| m.seed == 7));
    }
}
