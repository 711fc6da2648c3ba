use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::kmeans::kmeans;
use super::kmedoids::kmedoids_from_distances;
use super::umap::{umap_reduce, UmapParams};
use super::{pairwise_distances, silhouette_from_distances, squared_distance};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Videos with at most this many candidates keep every candidate.
pub const MIN_KEYFRAMES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionKind {
    Kmeans,
    Kmedoids,
    KmeansUmap,
    KmedoidsUmap,
    Random5,
    Random7,
}

impl SelectionKind {
    pub const ALL: [SelectionKind; 6] = [
        SelectionKind::Kmeans,
        SelectionKind::Kmedoids,
        SelectionKind::KmeansUmap,
        SelectionKind::KmedoidsUmap,
        SelectionKind::Random5,
        SelectionKind::Random7,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SelectionKind::Kmeans => "kmeans",
            SelectionKind::Kmedoids => "kmedoids",
            SelectionKind::KmeansUmap => "kmeans_umap",
            SelectionKind::KmedoidsUmap => "kmedoids_umap",
            SelectionKind::Random5 => "random5",
            SelectionKind::Random7 => "random7",
        }
    }

    pub fn is_clustering(self) -> bool {
        !matches!(self, SelectionKind::Random5 | SelectionKind::Random7)
    }

    pub fn uses_umap(self) -> bool {
        matches!(
            self,
            SelectionKind::KmeansUmap | SelectionKind::KmedoidsUmap
        )
    }

    fn random_count(self) -> Option<usize> {
        match self {
            SelectionKind::Random5 => Some(5),
            SelectionKind::Random7 => Some(7),
            _ => None,
        }
    }
}

impl fmt::Display for SelectionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SelectionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SelectionKind::ALL
            .into_iter()
            .find(|k| k.name() == s.to_ascii_lowercase().replace('-', "_"))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown selection method {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionMethod {
    pub kind: SelectionKind,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectConfig {
    pub k_min: usize,
    pub k_max: usize,
    pub umap: UmapParams,
    /// L2-normalize embeddings before clustering.
    pub normalize: bool,
}

impl Default for SelectConfig {
    fn default() -> Self {
        SelectConfig {
            k_min: MIN_KEYFRAMES,
            k_max: 20,
            umap: UmapParams::default(),
            normalize: false,
        }
    }
}

impl SelectConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_min < 2 || self.k_min > self.k_max {
            return Err(Error::InvalidParameter(format!(
                "k range {}..={} requires 2 <= k_min <= k_max",
                self.k_min, self.k_max
            )));
        }
        Ok(())
    }
}

/// Key frames chosen for one video by one method. One line of
/// `keyframes_<method>.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyFrameSet {
    pub video_id: String,
    pub method: SelectionKind,
    pub seed: u64,
    pub k_chosen: Option<usize>,
    pub silhouette: Option<f64>,
    #[serde(rename = "frame_indices")]
    pub key_frame_indices: Vec<usize>,
}

impl KeyFrameSet {
    /// Checks the set against the candidate frame indices it was drawn from.
    pub fn check_invariants(
        &self,
        candidates: &[usize],
        cfg: &SelectConfig,
    ) -> std::result::Result<(), String> {
        let pool: BTreeSet<usize> = candidates.iter().copied().collect();
        let chosen: BTreeSet<usize> = self.key_frame_indices.iter().copied().collect();
        if chosen.len() != self.key_frame_indices.len() {
            return Err("duplicate key frames".into());
        }
        if !chosen.is_subset(&pool) {
            return Err("key frame outside candidate set".into());
        }
        let n = pool.len();
        if n <= cfg.k_min {
            if chosen.len() != n || self.k_chosen.is_some() {
                return Err(format!("passthrough expected for {n} candidates"));
            }
            return Ok(());
        }
        if let Some(m) = self.method.random_count() {
            if chosen.len() != m.min(n) {
                return Err(format!("{} selected {} of {n}", self.method, chosen.len()));
            }
            return Ok(());
        }
        match self.k_chosen {
            Some(k) if k >= cfg.k_min && k <= cfg.k_max && k == chosen.len() => Ok(()),
            other => Err(format!("k_chosen {other:?} with {} frames", chosen.len())),
        }
    }
}

/// Per-video seed for the random baselines: differs across videos, stable
/// across runs.
pub fn derive_video_seed(video_id: &str, seed: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(video_id.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

/// Chooses key frames among one video's candidate frames.
///
/// `embeddings` holds one row per entry of `frame_indices`. Clustering
/// methods scan `k` over `k_min..=min(k_max, n−1)` and keep the best
/// silhouette (smallest `k` on ties); videos with at most `k_min` candidates
/// keep all of them.
pub fn select_keyframes<T: Scalar>(
    video_id: &str,
    frame_indices: &[usize],
    embeddings: ArrayView2<T>,
    method: &SelectionMethod,
    cfg: &SelectConfig,
) -> Result<KeyFrameSet> {
    cfg.validate()?;
    let n = frame_indices.len();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    if embeddings.nrows() != n {
        return Err(Error::LengthMismatch(n, embeddings.nrows()));
    }
    let mut result = KeyFrameSet {
        video_id: video_id.to_string(),
        method: method.kind,
        seed: method.seed,
        k_chosen: None,
        silhouette: None,
        key_frame_indices: Vec::new(),
    };

    if n <= cfg.k_min {
        let mut all = frame_indices.to_vec();
        all.sort_unstable();
        result.key_frame_indices = all;
        return Ok(result);
    }

    if let Some(m) = method.kind.random_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_video_seed(video_id, method.seed));
        let mut picked: Vec<usize> = rand::seq::index::sample(&mut rng, n, m.min(n))
            .into_iter()
            .map(|i| frame_indices[i])
            .collect();
        picked.sort_unstable();
        result.key_frame_indices = picked;
        return Ok(result);
    }

    let mut working = embeddings.to_owned();
    if cfg.normalize {
        for mut row in working.rows_mut() {
            let norm = row.dot(&row).sqrt();
            if norm > T::zero() {
                row.mapv_inplace(|v| v / norm);
            }
        }
    }
    if method.kind.uses_umap() {
        working = umap_reduce(working.view(), &cfg.umap)?;
    }
    let dist = pairwise_distances(working.view());

    let k_hi = cfg.k_max.min(n - 1);
    let mut best: Option<(usize, T, Vec<usize>)> = None;
    for k in cfg.k_min..=k_hi {
        let (assignments, picks) = match method.kind {
            SelectionKind::Kmeans | SelectionKind::KmeansUmap => {
                let fit = kmeans(working.view(), k, method.seed)?;
                let picks = nearest_to_centroids(
                    working.view(),
                    &fit.centroids,
                    &fit.assignments,
                    frame_indices,
                );
                (fit.assignments, picks)
            }
            _ => {
                let fit = kmedoids_from_distances(&dist, k)?;
                let picks = fit.medoids.iter().map(|&m| frame_indices[m]).collect();
                (fit.assignments, picks)
            }
        };
        let score = silhouette_from_distances(&dist, &assignments)?;
        if best.as_ref().is_none_or(|b| score > b.1) {
            best = Some((k, score, picks));
        }
    }
    let (k, score, mut picks) = best.expect("non-empty k range");
    picks.sort_unstable();
    result.k_chosen = Some(k);
    result.silhouette = Some(score.as_f64());
    result.key_frame_indices = picks;
    Ok(result)
}

/// Member of each cluster closest to its centroid; ties go to the lowest frame index.
fn nearest_to_centroids<T: Scalar>(
    points: ArrayView2<T>,
    centroids: &Array2<T>,
    assignments: &[usize],
    frame_indices: &[usize],
) -> Vec<usize> {
    let k = centroids.nrows();
    let mut best: Vec<Option<(T, usize)>> = vec![None; k];
    for (i, &c) in assignments.iter().enumerate() {
        let d = squared_distance(points.row(i), centroids.row(c));
        let frame = frame_indices[i];
        let better = match best[c] {
            None => true,
            Some((bd, bf)) => d < bd || (d == bd && frame < bf),
        };
        if better {
            best[c] = Some((d, frame));
        }
    }
    best.into_iter().flatten().map(|(_, f)| f).collect()
}
