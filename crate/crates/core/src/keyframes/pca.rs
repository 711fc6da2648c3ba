use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;
use crate::scalar::Scalar;

/// Principal-component projection of a point set.
#[derive(Debug, Clone)]
pub struct Pca<T> {
    /// `n × c` mean-centered scores.
    pub projection: Array2<T>,
    /// `c × D` unit component vectors, by descending eigenvalue.
    pub components: Array2<T>,
    /// Covariance eigenvalues of the kept components.
    pub eigenvalues: Array1<T>,
    pub mean: Array1<T>,
    /// Sum of all covariance eigenvalues (total variance).
    pub total_variance: T,
}

impl<T: Scalar> Pca<T> {
    pub fn explained_variance_ratio(&self) -> Array1<T> {
        if self.total_variance <= T::zero() {
            return Array1::zeros(self.eigenvalues.len());
        }
        self.eigenvalues.mapv(|v| v / self.total_variance)
    }

    /// Maps scores back to input space.
    pub fn reconstruct(&self) -> Array2<T> {
        let mut out = self.projection.dot(&self.components);
        for mut row in out.rows_mut() {
            row += &self.mean;
        }
        out
    }
}

/// Projects `points` (`n × D`) onto its top `c` principal components.
///
/// Each component's largest-magnitude loading is made positive. When `D > n`
/// the decomposition runs on the `n × n` Gram matrix instead of the
/// covariance; the result is the same.
pub fn pca<T: Scalar>(points: ArrayView2<T>, c: usize) -> Result<Pca<T>> {
    let (n, dim) = points.dim();
    if n < 2 {
        return Err(Error::InsufficientData { min: 2, actual: n });
    }
    if c == 0 || c > (n - 1).min(dim) {
        return Err(Error::InvalidParameter(format!(
            "component count {c} outside 1..={}",
            (n - 1).min(dim)
        )));
    }
    let mean = points.mean_axis(Axis(0)).expect("n >= 2");
    let mut centered = points.to_owned();
    for mut row in centered.rows_mut() {
        row -= &mean;
    }
    let denom = T::from_usize_lossy(n - 1);

    let (eigenvalues, mut components, total_variance) = if dim <= n {
        let cov = centered.t().dot(&centered).mapv(|v| v / denom);
        let total = cov.diag().sum();
        let (vals, vecs) = symmetric_eigen(&cov);
        let comps = vecs.slice(ndarray::s![.., ..c]).t().to_owned();
        (
            vals.slice(ndarray::s![..c]).mapv(|v| v.max(T::zero())),
            comps,
            total,
        )
    } else {
        let gram = centered.dot(&centered.t()).mapv(|v| v / denom);
        let total = gram.diag().sum();
        let (vals, vecs) = symmetric_eigen(&gram);
        let mut comps = Array2::zeros((c, dim));
        for k in 0..c {
            let v = centered.t().dot(&vecs.column(k));
            let norm = v.dot(&v).sqrt();
            if norm > T::epsilon() {
                comps.row_mut(k).assign(&v.mapv(|x| x / norm));
            }
        }
        (
            vals.slice(ndarray::s![..c]).mapv(|v| v.max(T::zero())),
            comps,
            total,
        )
    };

    for mut comp in components.rows_mut() {
        let mut best = T::zero();
        for &v in comp.iter() {
            if v.abs() > best.abs() {
                best = v;
            }
        }
        if best < T::zero() {
            comp.mapv_inplace(|v| -v);
        }
    }
    let projection = centered.dot(&components.t());
    Ok(Pca {
        projection,
        components,
        eigenvalues,
        mean,
        total_variance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn collinear_points_are_rank_one() {
        let pts = array![[0.0f64, 0.0], [1.0, 2.0], [2.0, 4.0], [-1.5, -3.0]];
        let p = pca(pts.view(), 1).unwrap();
        assert!((p.explained_variance_ratio()[0] - 1.0).abs() < 1e-12);
        // direction (1,2)/√5, positive largest loading
        assert!((p.components[[0, 0]] - 1.0 / 5f64.sqrt()).abs() < 1e-12);
        assert!((p.components[[0, 1]] - 2.0 / 5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn isotropic_cross_preserves_distances() {
        let pts = array![[1.0f64, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]];
        let p = pca(pts.view(), 2).unwrap();
        assert!((p.eigenvalues[0] - p.eigenvalues[1]).abs() < 1e-12);
        for i in 0..4 {
            for j in 0..4 {
                let a = super::super::squared_distance(pts.row(i), pts.row(j));
                let b = super::super::squared_distance(p.projection.row(i), p.projection.row(j));
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn full_rank_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts = Array2::from_shape_fn((20, 8), |_| rng.random_range(-1.0f64..1.0));
        let p = pca(pts.view(), 8).unwrap();
        let err = (&p.reconstruct() - &pts).mapv(|v| v * v).sum().sqrt();
        assert!(err < 1e-8, "{err}");
        // eigenvalues agree with an independent solver
        let mut centered = pts.clone();
        let mean = pts.mean_axis(Axis(0)).unwrap();
        for mut r in centered.rows_mut() {
            r -= &mean;
        }
        let cov = centered.t().dot(&centered) / 19.0;
        let na = nalgebra::DMatrix::from_fn(8, 8, |i, j| cov[[i, j]]);
        let mut expect: Vec<f64> = na.symmetric_eigen().eigenvalues.iter().copied().collect();
        expect.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for k in 0..8 {
            assert!((p.eigenvalues[k] - expect[k]).abs() < 1e-10);
        }
    }

    #[test]
    fn gram_route_matches_covariance_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let wide = Array2::from_shape_fn((6, 30), |_| rng.random_range(-1.0f64..1.0));
        let p = pca(wide.view(), 5).unwrap();
        // project the same data through a tall copy (rows duplicated keeps covariance direction)
        let mut centered = wide.clone();
        let mean = wide.mean_axis(Axis(0)).unwrap();
        for mut r in centered.rows_mut() {
            r -= &mean;
        }
        let cov = centered.t().dot(&centered) / 5.0;
        for k in 0..5 {
            let v = p.components.row(k);
            let cv = cov.dot(&v);
            for i in 0..30 {
                assert!((cv[i] - p.eigenvalues[k] * v[i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn component_count_bounds() {
        let pts = array![[0.0, 1.0], [1.0, 0.0], [2.0, 2.0]];
        assert!(pca(pts.view(), 3).is_err());
        assert!(pca(pts.view(), 0).is_err());
        assert!(pca(pts.slice(ndarray::s![..1, ..]), 1).is_err());
    }
}
