//! Key-frame selection: PCA, UMAP, k-means, k-medoids (PAM), silhouette and
//! the six selection strategies.

mod kmeans;
mod kmedoids;
mod pca;
mod select;
mod silhouette;
mod umap;

pub use kmeans::{kmeans, KMeansFit, MAX_LLOYD_ITERATIONS};
pub use kmedoids::{kmedoids, kmedoids_from_distances, total_deviation, KMedoidsFit};
pub use pca::{pca, Pca};
pub use select::{
    derive_video_seed, select_keyframes, KeyFrameSet, SelectConfig, SelectionKind, SelectionMethod,
    MIN_KEYFRAMES,
};
pub use silhouette::{silhouette, silhouette_from_distances};
pub use umap::{fit_ab, umap_reduce, UmapParams};

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::scalar::Scalar;

#[inline]
pub(crate) fn squared_distance<T: Scalar>(a: ArrayView1<T>, b: ArrayView1<T>) -> T {
    a.iter()
        .zip(b.iter())
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum()
}

/// Dense symmetric Euclidean distance matrix.
pub fn pairwise_distances<T: Scalar>(points: ArrayView2<T>) -> Array2<T> {
    let n = points.nrows();
    let mut d = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let v = squared_distance(points.row(i), points.row(j)).sqrt();
            d[[i, j]] = v;
            d[[j, i]] = v;
        }
    }
    d
}
