use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::filter::{gaussian_kernel, resize_bilinear, sample_bilinear, separable_filter};
use super::poly::{polynomial_expansion, PolyCoeffs};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Flow is estimated on intensities in 8-bit units so the solver regularizer
/// below keeps its usual scale.
const INTENSITY_SCALE: f64 = 255.0;
const DET_REGULARIZER: f64 = 1e-3;
/// Pyramid levels smaller than this on either side are skipped.
const MIN_LEVEL_SIDE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowParams {
    /// Downscale factor between consecutive pyramid levels, in `(0, 1)`.
    pub pyramid_scale: f64,
    /// Number of pyramid levels, counting the full-resolution one.
    pub levels: usize,
    /// Side of the Gaussian averaging window for the displacement solve (odd).
    pub window_size: usize,
    /// Refinement passes per level.
    pub iterations: usize,
    /// Side of the polynomial-expansion neighborhood (odd, ≥ 3).
    pub poly_n: usize,
    pub poly_sigma: f64,
}

impl Default for FlowParams {
    fn default() -> Self {
        FlowParams {
            pyramid_scale: 0.5,
            levels: 3,
            window_size: 15,
            iterations: 3,
            poly_n: 5,
            poly_sigma: 1.1,
        }
    }
}

impl FlowParams {
    pub fn new(
        pyramid_scale: f64,
        levels: usize,
        window_size: usize,
        iterations: usize,
        poly_n: usize,
        poly_sigma: f64,
    ) -> Result<Self> {
        let p = FlowParams {
            pyramid_scale,
            levels,
            window_size,
            iterations,
            poly_n,
            poly_sigma,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.pyramid_scale > 0.0 && self.pyramid_scale < 1.0) {
            return bad(format!("pyramid_scale {} not in (0,1)", self.pyramid_scale));
        }
        if self.levels == 0 {
            return bad("levels must be positive".into());
        }
        if self.window_size == 0 || self.window_size.is_multiple_of(2) {
            return bad(format!(
                "window_size {} must be odd and positive",
                self.window_size
            ));
        }
        if self.iterations == 0 {
            return bad("iterations must be positive".into());
        }
        if self.poly_n < 3 || self.poly_n.is_multiple_of(2) {
            return bad(format!("poly_n {} must be odd and >= 3", self.poly_n));
        }
        if !(self.poly_sigma.is_finite() && self.poly_sigma > 0.0) {
            return bad(format!("poly_sigma {} must be positive", self.poly_sigma));
        }
        Ok(())
    }
}

/// Per-pixel displacement from one frame to the next, in pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField<T> {
    pub width: usize,
    pub height: usize,
    pub dx: Array2<T>,
    pub dy: Array2<T>,
}

impl<T: Scalar> FlowField<T> {
    pub fn zeros(height: usize, width: usize) -> Self {
        FlowField {
            width,
            height,
            dx: Array2::zeros((height, width)),
            dy: Array2::zeros((height, width)),
        }
    }

    pub fn magnitude(&self) -> Array2<T> {
        Array2::from_shape_fn((self.height, self.width), |ix| {
            self.dx[ix].hypot(self.dy[ix])
        })
    }

    /// Mean Euclidean flow magnitude over all pixels.
    pub fn mean_magnitude(&self) -> T {
        let n = T::from_usize_lossy(self.width * self.height);
        self.dx
            .iter()
            .zip(self.dy.iter())
            .map(|(&a, &b)| a.hypot(b))
            .sum::<T>()
            / n
    }

    /// Mean flow vector over the centered window covering `fraction` of each side.
    pub fn mean_vector_central(&self, fraction: f64) -> (T, T) {
        let (y0, y1) = central_span(self.height, fraction);
        let (x0, x1) = central_span(self.width, fraction);
        let mut sx = T::zero();
        let mut sy = T::zero();
        for y in y0..y1 {
            for x in x0..x1 {
                sx += self.dx[[y, x]];
                sy += self.dy[[y, x]];
            }
        }
        let n = T::from_usize_lossy((y1 - y0) * (x1 - x0));
        (sx / n, sy / n)
    }

    pub fn is_finite(&self) -> bool {
        self.dx.iter().chain(self.dy.iter()).all(|v| v.is_finite())
    }
}

fn central_span(len: usize, fraction: f64) -> (usize, usize) {
    let keep = ((len as f64) * fraction).round() as usize;
    let keep = keep.clamp(1, len);
    let start = (len - keep) / 2;
    (start, start + keep)
}

/// Dense flow from `prev` to `next` (so `next(p + d) ≈ prev(p)`), estimated
/// coarse-to-fine from quadratic expansions of both frames.
pub fn farneback_flow<T: Scalar>(
    prev: &Array2<T>,
    next: &Array2<T>,
    params: &FlowParams,
) -> Result<FlowField<T>> {
    params.validate()?;
    if prev.dim() != next.dim() {
        return Err(Error::DimensionMismatch {
            expected: prev.len(),
            actual: next.len(),
        });
    }
    let (h, w) = prev.dim();
    let min = params.window_size.max(params.poly_n);
    if h < min || w < min {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            min,
        });
    }

    let mut sizes = vec![(h, w)];
    let mut scale = 1.0;
    for _ in 1..params.levels {
        scale *= params.pyramid_scale;
        let lh = (h as f64 * scale).round() as usize;
        let lw = (w as f64 * scale).round() as usize;
        if lh < MIN_LEVEL_SIDE.max(params.poly_n) || lw < MIN_LEVEL_SIDE.max(params.poly_n) {
            break;
        }
        sizes.push((lh, lw));
    }

    let to_units = |img: &Array2<T>| img.mapv(|v| v * T::c(INTENSITY_SCALE));
    let prev = to_units(prev);
    let next = to_units(next);

    let win_radius = (params.window_size - 1) / 2;
    let window: Vec<T> = gaussian_kernel(win_radius, 0.3 * params.window_size as f64);

    let mut flow: Option<FlowField<T>> = None;
    for (level, &(lh, lw)) in sizes.iter().enumerate().rev() {
        let level_scale = params.pyramid_scale.powi(level as i32);
        let (img0, img1) = if level == 0 {
            (prev.clone(), next.clone())
        } else {
            (
                pyramid_level(&prev, level_scale, lh, lw),
                pyramid_level(&next, level_scale, lh, lw),
            )
        };
        let mut current = match flow.take() {
            None => FlowField::zeros(lh, lw),
            Some(coarse) => upsample_flow(&coarse, lh, lw),
        };
        let r0 = polynomial_expansion(&img0, params.poly_n, params.poly_sigma)?;
        let r1 = polynomial_expansion(&img1, params.poly_n, params.poly_sigma)?;
        for _ in 0..params.iterations {
            let m = update_matrices(&r0, &r1, &current);
            let m: Vec<Array2<T>> = m
                .iter()
                .map(|c| separable_filter(c, &window, &window))
                .collect();
            current = solve_flow(&m, lh, lw);
        }
        flow = Some(current);
    }
    Ok(flow.expect("at least one pyramid level"))
}

fn pyramid_level<T: Scalar>(img: &Array2<T>, scale: f64, lh: usize, lw: usize) -> Array2<T> {
    let sigma = (1.0 / scale - 1.0) * 0.5;
    let ksize = ((sigma * 5.0).round() as usize | 1).max(3);
    let k: Vec<T> = gaussian_kernel(ksize / 2, sigma);
    let blurred = separable_filter(img, &k, &k);
    resize_bilinear(&blurred, lh, lw)
}

fn upsample_flow<T: Scalar>(coarse: &FlowField<T>, lh: usize, lw: usize) -> FlowField<T> {
    let fx = T::from_usize_lossy(lw) / T::from_usize_lossy(coarse.width);
    let fy = T::from_usize_lossy(lh) / T::from_usize_lossy(coarse.height);
    FlowField {
        width: lw,
        height: lh,
        dx: resize_bilinear(&coarse.dx, lh, lw).mapv(|v| v * fx),
        dy: resize_bilinear(&coarse.dy, lh, lw).mapv(|v| v * fy),
    }
}

/// Builds the five normal-equation channels `AᵀA` (g11, g12, g22) and `AᵀΔb`
/// (h1, h2) for every pixel given the current displacement estimate.
fn update_matrices<T: Scalar>(
    r0: &PolyCoeffs<T>,
    r1: &PolyCoeffs<T>,
    flow: &FlowField<T>,
) -> [Array2<T>; 5] {
    let (h, w) = r0.dim();
    let mut out: [Array2<T>; 5] = std::array::from_fn(|_| Array2::zeros((h, w)));
    let half = T::c(0.5);
    for y in 0..h {
        for x in 0..w {
            let dx = flow.dx[[y, x]];
            let dy = flow.dy[[y, x]];
            let sx = T::from_usize_lossy(x) + dx;
            let sy = T::from_usize_lossy(y) + dy;
            let a11 = (r0.a11[[y, x]] + sample_bilinear(&r1.a11, sx, sy)) * half;
            let a12 = (r0.a12[[y, x]] + sample_bilinear(&r1.a12, sx, sy)) * half;
            let a22 = (r0.a22[[y, x]] + sample_bilinear(&r1.a22, sx, sy)) * half;
            let db1 =
                -(sample_bilinear(&r1.b1, sx, sy) - r0.b1[[y, x]]) * half + a11 * dx + a12 * dy;
            let db2 =
                -(sample_bilinear(&r1.b2, sx, sy) - r0.b2[[y, x]]) * half + a12 * dx + a22 * dy;
            out[0][[y, x]] = a11 * a11 + a12 * a12;
            out[1][[y, x]] = a12 * (a11 + a22);
            out[2][[y, x]] = a12 * a12 + a22 * a22;
            out[3][[y, x]] = a11 * db1 + a12 * db2;
            out[4][[y, x]] = a12 * db1 + a22 * db2;
        }
    }
    out
}

fn solve_flow<T: Scalar>(m: &[Array2<T>], h: usize, w: usize) -> FlowField<T> {
    let eps = T::c(DET_REGULARIZER);
    let mut f = FlowField::zeros(h, w);
    for y in 0..h {
        for x in 0..w {
            let (g11, g12, g22, h1, h2) = (
                m[0][[y, x]],
                m[1][[y, x]],
                m[2][[y, x]],
                m[3][[y, x]],
                m[4][[y, x]],
            );
            let idet = T::one() / (g11 * g22 - g12 * g12 + eps);
            f.dx[[y, x]] = (g22 * h1 - g12 * h2) * idet;
            f.dy[[y, x]] = (g11 * h2 - g12 * h1) * idet;
        }
    }
    f
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Smooth periodic texture: a sum of random sinusoids with whole cycles
    /// across the frame, so circular shifts are seamless.
    pub(crate) fn periodic_texture(h: usize, w: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let waves: Vec<(f64, f64, f64, f64)> = (0..12)
            .map(|_| {
                let kx = rng.random_range(-6i32..=6) as f64;
                let ky = rng.random_range(-6i32..=6) as f64;
                let kx = if kx == 0.0 && ky == 0.0 { 3.0 } else { kx };
                (
                    kx,
                    ky,
                    rng.random_range(0.0..std::f64::consts::TAU),
                    rng.random_range(0.5..1.0),
                )
            })
            .collect();
        let total: f64 = waves.iter().map(|w| w.3).sum();
        Array2::from_shape_fn((h, w), |(y, x)| {
            let v: f64 = waves
                .iter()
                .map(|&(kx, ky, ph, amp)| {
                    amp * (std::f64::consts::TAU
                        * (kx * x as f64 / w as f64 + ky * y as f64 / h as f64)
                        + ph)
                        .sin()
                })
                .sum();
            0.5 + 0.45 * v / total
        })
    }

    /// `out(x, y) = src(x - dx, y - dy)` with wrap-around.
    pub(crate) fn shift_wrap(src: &Array2<f64>, dx: isize, dy: isize) -> Array2<f64> {
        let (h, w) = src.dim();
        Array2::from_shape_fn((h, w), |(y, x)| {
            let sy = (y as isize - dy).rem_euclid(h as isize) as usize;
            let sx = (x as isize - dx).rem_euclid(w as isize) as usize;
            src[[sy, sx]]
        })
    }

    #[test]
    fn identical_frames_have_zero_flow() {
        let a = periodic_texture(64, 64, 1);
        let f = farneback_flow(&a, &a, &FlowParams::default()).unwrap();
        assert!(f.mean_magnitude() < 1e-3);
        assert!(f.is_finite());
    }

    #[test]
    fn recovers_integer_translation() {
        let params = FlowParams::default();
        for (seed, (dx, dy)) in [(2u64, (2isize, 0isize)), (3, (-1, 3))] {
            let a = periodic_texture(128, 128, seed);
            let b = shift_wrap(&a, dx, dy);
            let f = farneback_flow(&a, &b, &params).unwrap();
            let (mx, my) = f.mean_vector_central(0.75);
            assert!(
                (mx - dx as f64).abs() < 0.5 && (my - dy as f64).abs() < 0.5,
                "got ({mx},{my}) for ({dx},{dy})"
            );
        }
    }

    #[test]
    fn swapped_frames_negate_flow() {
        let params = FlowParams::default();
        let a = periodic_texture(96, 96, 5);
        let b = shift_wrap(&a, 2, -1);
        let fwd = farneback_flow(&a, &b, &params)
            .unwrap()
            .mean_vector_central(0.75);
        let bwd = farneback_flow(&b, &a, &params)
            .unwrap()
            .mean_vector_central(0.75);
        assert!((fwd.0 + bwd.0).hypot(fwd.1 + bwd.1) < 0.5);
    }

    #[test]
    fn single_precision_flow() {
        let a = periodic_texture(64, 64, 9);
        let b = shift_wrap(&a, 1, 1);
        let f = farneback_flow(
            &a.mapv(|v| v as f32),
            &b.mapv(|v| v as f32),
            &FlowParams::default(),
        )
        .unwrap();
        let (mx, my) = f.mean_vector_central(0.75);
        assert!((mx - 1.0).abs() < 0.5 && (my - 1.0).abs() < 0.5);
    }

    #[test]
    fn rejects_bad_inputs() {
        let a = Array2::<f64>::zeros((32, 32));
        let b = Array2::<f64>::zeros((32, 31));
        assert!(matches!(
            farneback_flow(&a, &b, &FlowParams::default()),
            Err(Error::DimensionMismatch { .. })
        ));
        let small = Array2::<f64>::zeros((10, 40));
        assert!(matches!(
            farneback_flow(&small, &small, &FlowParams::default()),
            Err(Error::ImageTooSmall { .. })
        ));
        assert!(FlowParams::new(1.0, 3, 15, 3, 5, 1.1).is_err());
        assert!(FlowParams::new(0.5, 3, 14, 3, 5, 1.1).is_err());
        assert!(FlowParams::new(0.5, 3, 15, 3, 4, 1.1).is_err());
        assert!(FlowParams::new(0.5, 0, 15, 3, 5, 1.1).is_err());
    }
}
