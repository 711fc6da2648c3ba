use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::squared_distance;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MAX_LLOYD_ITERATIONS: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit<T> {
    pub assignments: Vec<usize>,
    pub centroids: Array2<T>,
    /// Sum of squared distances to the assigned centroid.
    pub inertia: T,
    /// Inertia after each assignment step.
    pub inertia_trace: Vec<T>,
    pub iterations: usize,
}

/// k-means++ seeding followed by Lloyd iterations until the assignment is a
/// fixpoint or [`MAX_LLOYD_ITERATIONS`] is reached. Empty clusters claim the
/// point farthest from its centroid.
pub fn kmeans<T: Scalar>(points: ArrayView2<T>, k: usize, seed: u64) -> Result<KMeansFit<T>> {
    let (n, dim) = points.dim();
    if k < 2 || k > n {
        return Err(Error::InvalidParameter(format!("k = {k} outside 2..={n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus(points, k, &mut rng);
    let mut assignments = vec![usize::MAX; n];
    let mut trace = Vec::new();
    let mut iterations = 0;

    for iter in 0..MAX_LLOYD_ITERATIONS {
        iterations = iter + 1;
        let mut next: Vec<usize> = (0..n).map(|i| nearest(points, &centroids, i).0).collect();
        repair_empty(points, &mut centroids, &mut next, k);
        trace.push(inertia(points, &centroids, &next));
        let converged = next == assignments;
        assignments = next;
        if converged {
            break;
        }
        centroids = means(points, &assignments, k, dim, &centroids);
    }
    let inertia = inertia(points, &centroids, &assignments);
    Ok(KMeansFit {
        assignments,
        centroids,
        inertia,
        inertia_trace: trace,
        iterations,
    })
}

fn plus_plus<T: Scalar>(points: ArrayView2<T>, k: usize, rng: &mut ChaCha8Rng) -> Array2<T> {
    let (n, dim) = points.dim();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = (0..n)
        .map(|i| squared_distance(points.row(i), points.row(chosen[0])).as_f64())
        .collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        } else {
            // every point coincides with a center; fall back to an unused index
            let unused: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            unused[rng.random_range(0..unused.len())]
        };
        chosen.push(pick);
        for (i, slot) in d2.iter_mut().enumerate() {
            *slot = slot.min(squared_distance(points.row(i), points.row(pick)).as_f64());
        }
    }
    let mut c = Array2::zeros((k, dim));
    for (row, &i) in chosen.iter().enumerate() {
        c.row_mut(row).assign(&points.row(i));
    }
    c
}

/// Closest centroid to point `i`; ties go to the lowest centroid index.
fn nearest<T: Scalar>(points: ArrayView2<T>, centroids: &Array2<T>, i: usize) -> (usize, T) {
    let mut best = (0, T::infinity());
    for (c, row) in centroids.rows().into_iter().enumerate() {
        let d = squared_distance(points.row(i), row);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn repair_empty<T: Scalar>(
    points: ArrayView2<T>,
    centroids: &mut Array2<T>,
    assign: &mut [usize],
    k: usize,
) {
    loop {
        let mut sizes = vec![0usize; k];
        for &a in assign.iter() {
            sizes[a] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        let mut far = None;
        let mut far_d = T::neg_infinity();
        for (i, &a) in assign.iter().enumerate() {
            if sizes[a] < 2 {
                continue;
            }
            let d = squared_distance(points.row(i), centroids.row(a));
            if d > far_d {
                far_d = d;
                far = Some(i);
            }
        }
        let i = far.expect("k <= n leaves a cluster with two members");
        assign[i] = empty;
        centroids.row_mut(empty).assign(&points.row(i));
    }
}

fn means<T: Scalar>(
    points: ArrayView2<T>,
    assign: &[usize],
    k: usize,
    dim: usize,
    old: &Array2<T>,
) -> Array2<T> {
    let mut sums = Array2::<T>::zeros((k, dim));
    let mut counts = vec![0usize; k];
    for (i, &a) in assign.iter().enumerate() {
        let mut row = sums.row_mut(a);
        row += &points.row(i);
        counts[a] += 1;
    }
    for (c, mut row) in sums.rows_mut().into_iter().enumerate() {
        if counts[c] == 0 {
            row.assign(&old.row(c));
        } else {
            let n = T::from_usize_lossy(counts[c]);
            row.mapv_inplace(|v| v / n);
        }
    }
    sums
}

fn inertia<T: Scalar>(points: ArrayView2<T>, centroids: &Array2<T>, assign: &[usize]) -> T {
    assign
        .iter()
        .enumerate()
        .map(|(i, &a)| squared_distance(points.row(i), centroids.row(a)))
        .sum()
}
