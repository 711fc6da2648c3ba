use ndarray::{Array2, ArrayView2};

use super::pairwise_distances;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct KMedoidsFit<T> {
    /// Point indices of the medoids; `assignments` index into this list.
    pub medoids: Vec<usize>,
    pub assignments: Vec<usize>,
    /// Sum of distances from each point to its nearest medoid.
    pub total_deviation: T,
    pub swaps: usize,
}

/// PAM on Euclidean distances between the rows of `points`.
pub fn kmedoids<T: Scalar>(points: ArrayView2<T>, k: usize) -> Result<KMedoidsFit<T>> {
    kmedoids_from_distances(&pairwise_distances(points), k)
}

/// Sum over points of the distance to the closest of `medoids`.
pub fn total_deviation<T: Scalar>(dist: &Array2<T>, medoids: &[usize]) -> T {
    (0..dist.nrows())
        .map(|i| {
            medoids
                .iter()
                .map(|&m| dist[[i, m]])
                .fold(T::infinity(), T::min)
        })
        .sum()
}

/// PAM on a precomputed distance matrix: greedy BUILD, then SWAP applying the
/// best medoid/non-medoid exchange until none lowers the total deviation.
/// Fully deterministic; ties resolve to the lowest index.
pub fn kmedoids_from_distances<T: Scalar>(dist: &Array2<T>, k: usize) -> Result<KMedoidsFit<T>> {
    let n = dist.nrows();
    if dist.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: dist.ncols(),
        });
    }
    if k < 2 || k > n {
        return Err(Error::InvalidParameter(format!("k = {k} outside 2..={n}")));
    }

    // BUILD
    let mut medoids: Vec<usize> = Vec::with_capacity(k);
    let mut is_medoid = vec![false; n];
    let first = (0..n)
        .map(|j| (j, (0..n).map(|i| dist[[i, j]]).sum::<T>()))
        .fold(
            (0, T::infinity()),
            |best, cur| if cur.1 < best.1 { cur } else { best },
        )
        .0;
    medoids.push(first);
    is_medoid[first] = true;
    let mut near: Vec<T> = (0..n).map(|i| dist[[i, first]]).collect();
    while medoids.len() < k {
        let mut best = (usize::MAX, T::neg_infinity());
        for c in (0..n).filter(|&c| !is_medoid[c]) {
            let gain: T = (0..n)
                .map(|i| (near[i] - dist[[i, c]]).max(T::zero()))
                .sum();
            if gain > best.1 {
                best = (c, gain);
            }
        }
        let c = best.0;
        medoids.push(c);
        is_medoid[c] = true;
        for i in 0..n {
            near[i] = near[i].min(dist[[i, c]]);
        }
    }

    // SWAP
    let mut swaps = 0;
    loop {
        let (nearest, second) = nearest_two(dist, &medoids);
        let current: T = nearest.iter().map(|p| p.1).sum();
        let tol = T::c(1e-12) * current.max(T::one());
        let mut best: Option<(usize, usize, T)> = None;
        for (mpos, _) in medoids.iter().enumerate() {
            for h in (0..n).filter(|&h| !is_medoid[h]) {
                let mut delta = T::zero();
                for i in 0..n {
                    let dih = dist[[i, h]];
                    let new = if nearest[i].0 == mpos {
                        second[i].min(dih)
                    } else {
                        nearest[i].1.min(dih)
                    };
                    delta += new - nearest[i].1;
                }
                if best.is_none_or(|b| delta < b.2) {
                    best = Some((mpos, h, delta));
                }
            }
        }
        match best {
            Some((mpos, h, delta)) if delta < -tol => {
                is_medoid[medoids[mpos]] = false;
                is_medoid[h] = true;
                medoids[mpos] = h;
                swaps += 1;
            }
            _ => break,
        }
    }

    let assignments = assign(dist, &medoids);
    let total_deviation = total_deviation(dist, &medoids);
    Ok(KMedoidsFit {
        medoids,
        assignments,
        total_deviation,
        swaps,
    })
}

/// Per point: (medoid position, distance) of the nearest medoid and the
/// distance to the second nearest.
fn nearest_two<T: Scalar>(dist: &Array2<T>, medoids: &[usize]) -> (Vec<(usize, T)>, Vec<T>) {
    let n = dist.nrows();
    let mut nearest = Vec::with_capacity(n);
    let mut second = Vec::with_capacity(n);
    for i in 0..n {
        let mut best = (usize::MAX, T::infinity());
        let mut next = T::infinity();
        for (pos, &m) in medoids.iter().enumerate() {
            let d = dist[[i, m]];
            if d < best.1 {
                next = best.1;
                best = (pos, d);
            } else if d < next {
                next = d;
            }
        }
        nearest.push(best);
        second.push(next);
    }
    (nearest, second)
}

/// Nearest-medoid labels; a medoid always labels itself.
fn assign<T: Scalar>(dist: &Array2<T>, medoids: &[usize]) -> Vec<usize> {
    (0..dist.nrows())
        .map(|i| {
            if let Some(pos) = medoids.iter().position(|&m| m == i) {
                return pos;
            }
            let mut best = (0, T::infinity());
            for (pos, &m) in medoids.iter().enumerate() {
                if dist[[i, m]] < best.1 {
                    best = (pos, dist[[i, m]]);
                }
            }
            best.0
        })
        .collect()
}
