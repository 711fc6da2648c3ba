use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView2};

use super::pairwise_distances;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Mean silhouette width of a labelling under Euclidean distance.
pub fn silhouette<T: Scalar>(points: ArrayView2<T>, assignments: &[usize]) -> Result<T> {
    if points.nrows() != assignments.len() {
        return Err(Error::LengthMismatch(points.nrows(), assignments.len()));
    }
    silhouette_from_distances(&pairwise_distances(points), assignments)
}

/// Mean of `s(i) = (b(i) − a(i)) / max(a(i), b(i))`, where `a` is the mean
/// distance to the rest of the point's cluster and `b` the lowest mean
/// distance to another cluster. Points in singleton clusters, and points with
/// `a = b = 0`, contribute 0.
pub fn silhouette_from_distances<T: Scalar>(dist: &Array2<T>, assignments: &[usize]) -> Result<T> {
    let n = assignments.len();
    if dist.nrows() != n || dist.ncols() != n {
        return Err(Error::LengthMismatch(dist.nrows(), n));
    }
    if n < 3 {
        return Err(Error::InsufficientData { min: 3, actual: n });
    }
    // dense relabelling keeps per-point sums in a small vector
    let mut labels = BTreeMap::new();
    for &a in assignments {
        let next = labels.len();
        labels.entry(a).or_insert(next);
    }
    let k = labels.len();
    if k < 2 {
        return Err(Error::SingleCluster);
    }
    let dense: Vec<usize> = assignments.iter().map(|a| labels[a]).collect();
    let mut sizes = vec![0usize; k];
    for &c in &dense {
        sizes[c] += 1;
    }

    let mut total = T::zero();
    let mut sums = vec![T::zero(); k];
    for i in 0..n {
        sums.iter_mut().for_each(|s| *s = T::zero());
        for j in 0..n {
            if j != i {
                sums[dense[j]] += dist[[i, j]];
            }
        }
        let own = dense[i];
        if sizes[own] == 1 {
            continue;
        }
        let a = sums[own] / T::from_usize_lossy(sizes[own] - 1);
        let b = (0..k)
            .filter(|&c| c != own)
            .map(|c| sums[c] / T::from_usize_lossy(sizes[c]))
            .fold(T::infinity(), T::min);
        let m = a.max(b);
        if m > T::zero() {
            total += (b - a) / m;
        }
    }
    Ok(total / T::from_usize_lossy(n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn duplicated_pairs_score_one() {
        let pts = array![[0.0, 0.0], [0.0, 0.0], [1.0, 1.0], [1.0, 1.0]];
        assert_eq!(silhouette(pts.view(), &[0, 0, 1, 1]).unwrap(), 1.0);
    }

    #[test]
    fn one_dimensional_hand_computation() {
        // s = 9/11, 7/9, 7/9, 9/11
        let pts = array![[0.0f64], [1.0], [5.0], [6.0]];
        let s = silhouette(pts.view(), &[0, 0, 1, 1]).unwrap();
        let expect = (2.0 * 9.0 / 11.0 + 2.0 * 7.0 / 9.0) / 4.0;
        assert!((s - expect).abs() < 1e-12);
        assert!((s - 0.7980).abs() < 1e-4);
    }

    #[test]
    fn singleton_contributes_zero() {
        let pts = array![[0.0f64], [1.0], [10.0]];
        // a(0)=1, b(0)=10 -> 0.9; a(1)=1, b(1)=9 -> 8/9; singleton -> 0
        let s = silhouette(pts.view(), &[7, 7, 3]).unwrap();
        assert!((s - (0.9 + 8.0 / 9.0) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let pts = array![[0.0], [1.0], [2.0]];
        assert!(matches!(
            silhouette(pts.view(), &[0, 0, 0]),
            Err(Error::SingleCluster)
        ));
        assert!(silhouette(pts.view(), &[0, 1]).is_err());
        assert!(silhouette(pts.slice(ndarray::s![..2, ..]), &[0, 1]).is_err());
    }
}
