use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::pairwise_distances;
use super::pca::pca;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const SMOOTH_K_TOLERANCE: f64 = 1e-5;
const MIN_K_DIST_SCALE: f64 = 1e-3;
const INIT_NOISE: f64 = 1e-4;
const INIT_RANGE: f64 = 10.0;
const GRAD_CLIP: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UmapParams {
    pub n_components: usize,
    pub min_dist: f64,
    pub spread: f64,
    /// Upper bound on the neighborhood size; the effective size is
    /// `min(n_neighbors, n)` and counts the point itself.
    pub n_neighbors: usize,
    pub seed: u64,
    pub n_epochs: usize,
    pub negative_sample_rate: usize,
    pub learning_rate: f64,
}

impl Default for UmapParams {
    fn default() -> Self {
        UmapParams {
            n_components: 5,
            min_dist: 0.0,
            spread: 1.0,
            n_neighbors: 15,
            seed: 42,
            n_epochs: 500,
            negative_sample_rate: 5,
            learning_rate: 1.0,
        }
    }
}

/// Fits `1 / (1 + a·x^(2b))` to the target membership curve for `min_dist`
/// and `spread` by damped Gauss-Newton least squares.
pub fn fit_ab(min_dist: f64, spread: f64) -> (f64, f64) {
    let xs: Vec<f64> = (0..300).map(|i| 3.0 * spread * i as f64 / 299.0).collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|&x| {
            if x < min_dist {
                1.0
            } else {
                (-(x - min_dist) / spread).exp()
            }
        })
        .collect();
    let residuals = |a: f64, b: f64| -> f64 {
        xs.iter()
            .zip(&ys)
            .map(|(&x, &y)| {
                let r = 1.0 / (1.0 + a * x.powf(2.0 * b)) - y;
                r * r
            })
            .sum()
    };
    let (mut a, mut b) = (1.0f64, 1.0f64);
    let mut lambda = 1e-3;
    let mut cost = residuals(a, b);
    for _ in 0..500 {
        // normal equations of the linearized problem
        let (mut jaa, mut jab, mut jbb, mut ga, mut gb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&x, &y) in xs.iter().zip(&ys) {
            let p = if x > 0.0 { x.powf(2.0 * b) } else { 0.0 };
            let den = 1.0 + a * p;
            let f = 1.0 / den;
            let r = f - y;
            let da = -p / (den * den);
            let db = if x > 0.0 {
                -a * p * 2.0 * x.ln() / (den * den)
            } else {
                0.0
            };
            jaa += da * da;
            jab += da * db;
            jbb += db * db;
            ga += da * r;
            gb += db * r;
        }
        let (m11, m22) = (jaa * (1.0 + lambda), jbb * (1.0 + lambda));
        let det = m11 * m22 - jab * jab;
        if det.abs() < 1e-300 {
            break;
        }
        let step_a = -(m22 * ga - jab * gb) / det;
        let step_b = -(m11 * gb - jab * ga) / det;
        let (na, nb) = (a + step_a, b + step_b);
        let new_cost = if na > 0.0 && nb > 0.0 {
            residuals(na, nb)
        } else {
            f64::INFINITY
        };
        if new_cost < cost {
            let converged = (cost - new_cost) < 1e-15 * cost.max(1e-300);
            a = na;
            b = nb;
            cost = new_cost;
            lambda = (lambda / 10.0).max(1e-12);
            if converged {
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
        }
    }
    (a, b)
}

/// Reduces `points` (`n × D`) to `n × n_components` with UMAP: exact
/// Euclidean kNN graph, smooth-kNN calibrated memberships, fuzzy union,
/// PCA-initialized layout and seeded stochastic gradient optimization.
///
/// The output is a deterministic function of the input and `params.seed`.
pub fn umap_reduce<T: Scalar>(points: ArrayView2<T>, params: &UmapParams) -> Result<Array2<T>> {
    let (n, _dim) = points.dim();
    let nc = params.n_components;
    if nc == 0 {
        return Err(Error::InvalidParameter(
            "n_components must be positive".into(),
        ));
    }
    if n <= nc {
        return Err(Error::InsufficientData {
            min: nc + 1,
            actual: n,
        });
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    if params.n_neighbors < 2 || params.n_epochs == 0 {
        return Err(Error::InvalidParameter(
            "n_neighbors >= 2 and n_epochs > 0 required".into(),
        ));
    }

    let graph = fuzzy_graph(points, params.n_neighbors.min(n));
    let (a, b) = fit_ab(params.min_dist, params.spread);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut embedding = initial_layout(points, nc, &mut rng)?;
    optimize_layout(&mut embedding, &graph, n, a, b, params, &mut rng);
    Ok(embedding.mapv(T::c))
}

/// Symmetric fuzzy graph as `(head, tail, weight)` in row-major order.
fn fuzzy_graph<T: Scalar>(points: ArrayView2<T>, k: usize) -> Vec<(usize, usize, f64)> {
    let n = points.nrows();
    let dist = pairwise_distances(points).mapv(|v| v.as_f64());
    let target = (k as f64).log2();
    let mean_all: f64 = dist.iter().sum::<f64>() / (n * n) as f64;

    let mut membership = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&p, &q| {
            dist[[i, p]]
                .total_cmp(&dist[[i, q]])
                .then((p != i).cmp(&(q != i)))
                .then(p.cmp(&q))
        });
        let knn = &order[..k];
        let dists: Vec<f64> = knn.iter().map(|&j| dist[[i, j]]).collect();
        let rho = dists.iter().copied().find(|&d| d > 0.0).unwrap_or(0.0);

        let (mut lo, mut hi, mut mid) = (0.0f64, f64::INFINITY, 1.0f64);
        for _ in 0..64 {
            let psum: f64 = dists[1..]
                .iter()
                .map(|&d| {
                    let d = d - rho;
                    if d > 0.0 {
                        (-d / mid).exp()
                    } else {
                        1.0
                    }
                })
                .sum();
            if (psum - target).abs() < SMOOTH_K_TOLERANCE {
                break;
            }
            if psum > target {
                hi = mid;
                mid = (lo + hi) / 2.0;
            } else {
                lo = mid;
                mid = if hi.is_infinite() {
                    mid * 2.0
                } else {
                    (lo + hi) / 2.0
                };
            }
        }
        let mut sigma = mid;
        let floor = if rho > 0.0 {
            MIN_K_DIST_SCALE * dists.iter().sum::<f64>() / k as f64
        } else {
            MIN_K_DIST_SCALE * mean_all
        };
        if sigma < floor {
            sigma = floor;
        }

        for (&j, &d) in knn.iter().zip(&dists) {
            let w = if j == i {
                0.0
            } else if d - rho <= 0.0 || sigma == 0.0 {
                1.0
            } else {
                (-(d - rho) / sigma).exp()
            };
            membership[[i, j]] = w;
        }
    }

    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let p = membership[[i, j]];
            let q = membership[[j, i]];
            let w = p + q - p * q;
            if w > 0.0 {
                edges.push((i, j, w));
            }
        }
    }
    edges
}

fn initial_layout<T: Scalar>(
    points: ArrayView2<T>,
    nc: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Array2<f64>> {
    let proj = pca(points, nc)?.projection.mapv(|v| v.as_f64());
    let max_abs = proj.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let expansion = if max_abs > 0.0 {
        INIT_RANGE / max_abs
    } else {
        1.0
    };
    let noise = Normal::new(0.0, INIT_NOISE).expect("valid normal");
    let mut emb = proj.mapv(|v| v * expansion);
    for v in emb.iter_mut() {
        *v += noise.sample(rng);
    }
    for mut col in emb.columns_mut() {
        let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        if span > 0.0 {
            col.mapv_inplace(|v| INIT_RANGE * (v - lo) / span);
        } else {
            col.fill(0.0);
        }
    }
    Ok(emb)
}

fn optimize_layout(
    emb: &mut Array2<f64>,
    graph: &[(usize, usize, f64)],
    n: usize,
    a: f64,
    b: f64,
    params: &UmapParams,
    rng: &mut ChaCha8Rng,
) {
    let n_epochs = params.n_epochs as f64;
    let max_w = graph.iter().map(|e| e.2).fold(0.0f64, f64::max);
    if max_w <= 0.0 {
        return;
    }
    // edges too weak to be sampled even once are dropped
    let edges: Vec<(usize, usize, f64)> = graph
        .iter()
        .copied()
        .filter(|e| e.2 >= max_w / n_epochs)
        .map(|(h, t, w)| (h, t, max_w / w))
        .collect();
    let neg_rate = params.negative_sample_rate.max(1) as f64;
    let mut next_sample: Vec<f64> = edges.iter().map(|e| e.2).collect();
    let per_negative: Vec<f64> = edges.iter().map(|e| e.2 / neg_rate).collect();
    let mut next_negative = per_negative.clone();
    let dim = emb.ncols();
    let clip = |v: f64| v.clamp(-GRAD_CLIP, GRAD_CLIP);

    let mut alpha = params.learning_rate;
    for epoch in 0..params.n_epochs {
        let e = epoch as f64;
        for (idx, &(head, tail, per_sample)) in edges.iter().enumerate() {
            if next_sample[idx] > e {
                continue;
            }
            let d2: f64 = (0..dim)
                .map(|d| (emb[[head, d]] - emb[[tail, d]]).powi(2))
                .sum();
            let coeff = if d2 > 0.0 {
                -2.0 * a * b * d2.powf(b - 1.0) / (a * d2.powf(b) + 1.0)
            } else {
                0.0
            };
            for d in 0..dim {
                let g = clip(coeff * (emb[[head, d]] - emb[[tail, d]]));
                emb[[head, d]] += g * alpha;
                emb[[tail, d]] -= g * alpha;
            }
            next_sample[idx] += per_sample;

            let n_neg = ((e - next_negative[idx]) / per_negative[idx])
                .floor()
                .max(0.0) as usize;
            for _ in 0..n_neg {
                let other = rng.random_range(0..n);
                if other == head {
                    continue;
                }
                let d2: f64 = (0..dim)
                    .map(|d| (emb[[head, d]] - emb[[other, d]]).powi(2))
                    .sum();
                if d2 <= 0.0 {
                    continue;
                }
                let coeff = 2.0 * b / ((0.001 + d2) * (a * d2.powf(b) + 1.0));
                for d in 0..dim {
                    let g = clip(coeff * (emb[[head, d]] - emb[[other, d]]));
                    emb[[head, d]] += g * alpha;
                }
            }
            next_negative[idx] += n_neg as f64 * per_negative[idx];
        }
        alpha = params.learning_rate * (1.0 - (e + 1.0) / n_epochs);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::StandardNormal;

    #[test]
    fn ab_fit_for_zero_min_dist() {
        // reference least-squares solution of the same curve fit
        let (a, b) = fit_ab(0.0, 1.0);
        assert!((a - 1.9328084).abs() < 1e-3, "a = {a}");
        assert!((b - 0.79049497).abs() < 1e-3, "b = {b}");
        let (a, b) = fit_ab(0.1, 1.0);
        assert!((a - 1.57694346).abs() < 1e-3 && (b - 0.89506088).abs() < 1e-3);
    }

    fn blobs(per: usize, dim: usize, sep: f64, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((2 * per, dim), |(i, d)| {
            let center = if i >= per && d == 0 { sep } else { 0.0 };
            center + rng.sample::<f64, _>(StandardNormal)
        })
    }

    #[test]
    fn shape_and_determinism() {
        let pts = blobs(10, 6, 20.0, 1);
        let p = UmapParams {
            n_epochs: 100,
            ..UmapParams::default()
        };
        let a = umap_reduce(pts.view(), &p).unwrap();
        let b = umap_reduce(pts.view(), &p).unwrap();
        assert_eq!(a.dim(), (20, 5));
        assert_eq!(a, b);
        assert!(a.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn separated_blobs_stay_separated() {
        let pts = blobs(30, 10, 50.0, 3);
        let out = umap_reduce(pts.view(), &UmapParams::default()).unwrap();
        let d = pairwise_distances(out.view());
        let (mut intra, mut inter) = (0.0f64, f64::INFINITY);
        for i in 0..60 {
            for j in (i + 1)..60 {
                if (i < 30) == (j < 30) {
                    intra = intra.max(d[[i, j]]);
                } else {
                    inter = inter.min(d[[i, j]]);
                }
            }
        }
        assert!(intra < inter, "intra {intra} inter {inter}");
    }

    #[test]
    fn small_neighborhoods_and_duplicates() {
        // fewer than 15 points and fully duplicated input both work
        let pts = blobs(4, 6, 10.0, 2);
        assert_eq!(
            umap_reduce(pts.view(), &UmapParams::default())
                .unwrap()
                .dim(),
            (8, 5)
        );
        let same = Array2::from_elem((9, 6), 0.25f64);
        let out = umap_reduce(same.view(), &UmapParams::default()).unwrap();
        assert!(out.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn rejects_invalid_input() {
        let pts = Array2::from_elem((5, 8), 1.0f64);
        assert!(matches!(
            umap_reduce(pts.view(), &UmapParams::default()),
            Err(Error::InsufficientData { .. })
        ));
        let mut pts = blobs(5, 6, 5.0, 1);
        pts[[2, 3]] = f64::NAN;
        assert!(matches!(
            umap_reduce(pts.view(), &UmapParams::default()),
            Err(Error::NonFinite)
        ));
    }
}
