use ndarray::Array2;

use crate::error::{Error, Result};
use crate::linalg::invert;
use crate::scalar::Scalar;

/// Per-pixel quadratic model `f(p) ≈ pᵀ A p + bᵀ p + c` in local pixel
/// coordinates `p = (x, y)` (x along columns, y along rows).
///
/// `A = [[a11, a12], [a12, a22]]`, so the fitted `xy` coefficient is `2·a12`.
#[derive(Debug, Clone)]
pub struct PolyCoeffs<T> {
    pub a11: Array2<T>,
    pub a12: Array2<T>,
    pub a22: Array2<T>,
    pub b1: Array2<T>,
    pub b2: Array2<T>,
    pub c: Array2<T>,
}

impl<T: Scalar> PolyCoeffs<T> {
    pub fn dim(&self) -> (usize, usize) {
        self.c.dim()
    }
}

// Basis order: 1, x, y, x², y², xy. Powers (of x, of y) per basis function.
const POWERS: [(usize, usize); 6] = [(0, 0), (1, 0), (0, 1), (2, 0), (0, 2), (1, 1)];

/// Weighted least-squares quadratic fit over a `poly_n × poly_n` window with
/// separable Gaussian applicability of standard deviation `poly_sigma`.
///
/// Borders replicate edge pixels, so only pixels at least `(poly_n-1)/2` from
/// the edge are exact fits of the original image.
pub fn polynomial_expansion<T: Scalar>(
    image: &Array2<T>,
    poly_n: usize,
    poly_sigma: f64,
) -> Result<PolyCoeffs<T>> {
    if poly_n < 3 || poly_n.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "poly_n must be odd and >= 3, got {poly_n}"
        )));
    }
    if !(poly_sigma.is_finite() && poly_sigma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "poly_sigma must be positive, got {poly_sigma}"
        )));
    }
    let (h, w) = image.dim();
    if h < poly_n || w < poly_n {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            min: poly_n,
        });
    }
    let radius = (poly_n - 1) / 2;
    let r = radius as isize;
    let g: Vec<f64> = (-r..=r)
        .map(|t| (-((t * t) as f64) / (2.0 * poly_sigma * poly_sigma)).exp())
        .collect();
    let offsets: Vec<f64> = (-r..=r).map(|t| t as f64).collect();

    // Gram matrix of the weighted basis; identical for every pixel.
    let mut gram = Array2::<f64>::zeros((6, 6));
    for (iy, &v) in offsets.iter().enumerate() {
        for (ix, &u) in offsets.iter().enumerate() {
            let wgt = g[ix] * g[iy];
            let phi: Vec<f64> = POWERS
                .iter()
                .map(|&(px, py)| u.powi(px as i32) * v.powi(py as i32))
                .collect();
            for p in 0..6 {
                for q in 0..6 {
                    gram[[p, q]] += wgt * phi[p] * phi[q];
                }
            }
        }
    }
    let gram_inv: Vec<T> = invert(&gram)?.iter().map(|&v| T::c(v)).collect();

    // Row pass: Σ_u g(u) u^a f(y, x+u) for a = 0, 1, 2.
    let row_taps: Vec<Vec<T>> = (0..3)
        .map(|a| {
            g.iter()
                .zip(&offsets)
                .map(|(&gw, &u)| T::c(gw * u.powi(a)))
                .collect()
        })
        .collect();
    let clamp = |i: isize, len: usize| i.clamp(0, len as isize - 1) as usize;
    let n = poly_n;
    let image = image.as_standard_layout();
    let data = image.as_slice().expect("standard layout");

    let mut rows: Vec<Vec<T>> = vec![vec![T::zero(); h * w]; 3];
    let mut padded = vec![T::zero(); w + 2 * radius];
    for y in 0..h {
        let src = &data[y * w..(y + 1) * w];
        for (i, p) in padded.iter_mut().enumerate() {
            *p = src[clamp(i as isize - r, w)];
        }
        for (taps, dst) in row_taps.iter().zip(rows.iter_mut()) {
            for (x, out) in dst[y * w..(y + 1) * w].iter_mut().enumerate() {
                *out = taps
                    .iter()
                    .zip(&padded[x..x + n])
                    .fold(T::zero(), |acc, (&t, &v)| acc + t * v);
            }
        }
    }

    // Column pass per basis function gives the right-hand side Bᵀ W f.
    let mut rhs: Vec<Vec<T>> = vec![vec![T::zero(); h * w]; 6];
    for (p, &(px, py)) in POWERS.iter().enumerate() {
        let src = &rows[px];
        let taps = &row_taps[py];
        let dst = &mut rhs[p];
        for y in 0..h {
            let out = &mut dst[y * w..(y + 1) * w];
            for (k, &t) in taps.iter().enumerate() {
                let sy = clamp(y as isize + k as isize - r, h);
                for (d, &v) in out.iter_mut().zip(&src[sy * w..(sy + 1) * w]) {
                    *d += t * v;
                }
            }
        }
    }

    let mut coeffs: Vec<Vec<T>> = vec![vec![T::zero(); h * w]; 6];
    for i in 0..h * w {
        let v: [T; 6] = std::array::from_fn(|q| rhs[q][i]);
        for (p, dst) in coeffs.iter_mut().enumerate() {
            dst[i] = gram_inv[p * 6..p * 6 + 6]
                .iter()
                .zip(&v)
                .fold(T::zero(), |acc, (&gi, &vq)| acc + gi * vq);
        }
    }
    let coeffs: Vec<Array2<T>> = coeffs
        .into_iter()
        .map(|c| Array2::from_shape_vec((h, w), c).expect("shape matches buffer"))
        .collect();
    let half = T::c(0.5);
    let mut it = coeffs.into_iter();
    let c = it.next().unwrap();
    let b1 = it.next().unwrap();
    let b2 = it.next().unwrap();
    let a11 = it.next().unwrap();
    let a22 = it.next().unwrap();
    let a12 = it.next().unwrap().mapv(|v| v * half);
    Ok(PolyCoeffs {
        a11,
        a12,
        a22,
        b1,
        b2,
        c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn interior(h: usize, w: usize, r: usize) -> impl Iterator<Item = (usize, usize)> {
        (r..h - r).flat_map(move |y| (r..w - r).map(move |x| (y, x)))
    }

    #[test]
    fn constant_image() {
        let img = Array2::from_elem((12, 12), 0.5f64);
        let p = polynomial_expansion(&img, 5, 1.1).unwrap();
        for (y, x) in interior(12, 12, 2) {
            assert!(p.a11[[y, x]].abs() < 1e-12);
            assert!(p.a12[[y, x]].abs() < 1e-12);
            assert!(p.a22[[y, x]].abs() < 1e-12);
            assert!(p.b1[[y, x]].abs() < 1e-12);
            assert!(p.b2[[y, x]].abs() < 1e-12);
            assert!((p.c[[y, x]] - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_ramp() {
        let img = Array2::from_shape_fn((16, 20), |(_, x)| 0.01 * x as f64);
        let p = polynomial_expansion(&img, 5, 1.1).unwrap();
        for (y, x) in interior(16, 20, 2) {
            assert!((p.b1[[y, x]] - 0.01).abs() < 1e-12);
            assert!(p.b2[[y, x]].abs() < 1e-12);
            assert!(p.a11[[y, x]].abs() < 1e-12);
            assert!(p.a22[[y, x]].abs() < 1e-12);
            assert!((p.c[[y, x]] - 0.01 * x as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_quadratic_is_recovered() {
        // f = 0.3x² - 0.2xy + 0.1y² + 0.05x - 0.07y + 0.4 around each pixel
        let f =
            |x: f64, y: f64| 0.3 * x * x - 0.2 * x * y + 0.1 * y * y + 0.05 * x - 0.07 * y + 0.4;
        let img = Array2::from_shape_fn((15, 15), |(y, x)| f(x as f64, y as f64));
        let p = polynomial_expansion(&img, 7, 1.5).unwrap();
        let (y, x) = (7usize, 7usize);
        let (xf, yf) = (x as f64, y as f64);
        assert!((p.a11[[y, x]] - 0.3).abs() < 1e-9);
        assert!((p.a22[[y, x]] - 0.1).abs() < 1e-9);
        assert!((p.a12[[y, x]] + 0.1).abs() < 1e-9);
        // gradient at the pixel: b = ∇f(x, y)
        assert!((p.b1[[y, x]] - (0.6 * xf - 0.2 * yf + 0.05)).abs() < 1e-9);
        assert!((p.b2[[y, x]] - (-0.2 * xf + 0.2 * yf - 0.07)).abs() < 1e-9);
        assert!((p.c[[y, x]] - f(xf, yf)).abs() < 1e-9);
    }

    #[test]
    fn random_texture_matches_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let img = Array2::from_shape_fn((32, 32), |_| rng.random::<f64>());
        let (n, sigma) = (5usize, 1.1f64);
        let p = polynomial_expansion(&img, n, sigma).unwrap();
        let r = (n / 2) as isize;
        for (y, x) in interior(32, 32, n / 2) {
            let mut rows = Vec::new();
            let mut wts = Vec::new();
            let mut vals = Vec::new();
            for v in -r..=r {
                for u in -r..=r {
                    let (uf, vf) = (u as f64, v as f64);
                    rows.push([1.0, uf, vf, uf * uf, vf * vf, uf * vf]);
                    wts.push((-(uf * uf + vf * vf) / (2.0 * sigma * sigma)).exp());
                    vals.push(img[[(y as isize + v) as usize, (x as isize + u) as usize]]);
                }
            }
            let b = DMatrix::from_fn(rows.len(), 6, |i, j| rows[i][j]);
            let wm = DMatrix::from_diagonal(&DVector::from_vec(wts));
            let f = DVector::from_vec(vals);
            let lhs = b.transpose() * &wm * &b;
            let rhs = b.transpose() * &wm * f;
            let sol = lhs.lu().solve(&rhs).unwrap();
            let got = [
                p.c[[y, x]],
                p.b1[[y, x]],
                p.b2[[y, x]],
                p.a11[[y, x]],
                p.a22[[y, x]],
                2.0 * p.a12[[y, x]],
            ];
            for k in 0..6 {
                assert!(
                    (got[k] - sol[k]).abs() < 1e-6,
                    "pixel ({y},{x}) coeff {k}: {} vs {}",
                    got[k],
                    sol[k]
                );
            }
        }
    }

    #[test]
    fn too_small_or_bad_params() {
        let img = Array2::from_elem((4, 10), 0.0f64);
        assert!(matches!(
            polynomial_expansion(&img, 5, 1.1),
            Err(Error::ImageTooSmall { .. })
        ));
        let img = Array2::from_elem((10, 10), 0.0f64);
        assert!(polynomial_expansion(&img, 4, 1.1).is_err());
        assert!(polynomial_expansion(&img, 5, 0.0).is_err());
    }

    #[test]
    fn single_precision_agrees() {
        let img64 = Array2::from_shape_fn((12, 12), |(y, x)| ((x * 7 + y * 3) % 11) as f64 / 11.0);
        let img32 = img64.mapv(|v| v as f32);
        let p64 = polynomial_expansion(&img64, 5, 1.1).unwrap();
        let p32 = polynomial_expansion(&img32, 5, 1.1).unwrap();
        for (a, b) in p64.b1.iter().zip(p32.b1.iter()) {
            assert!((a - *b as f64).abs() < 1e-5);
        }
    }
}
