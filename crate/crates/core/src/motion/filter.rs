use ndarray::Array2;

use crate::scalar::Scalar;

/// Normalized Gaussian taps for offsets `-radius..=radius`.
pub fn gaussian_kernel<T: Scalar>(radius: usize, sigma: f64) -> Vec<T> {
    let r = radius as isize;
    let raw: Vec<f64> = (-r..=r)
        .map(|t| (-((t * t) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|w| T::c(w / sum)).collect()
}

#[inline]
fn clamp_index(i: isize, len: usize) -> usize {
    i.clamp(0, len as isize - 1) as usize
}

/// Correlates rows with `row_kernel` then columns with `col_kernel`,
/// replicating border pixels.
pub fn separable_filter<T: Scalar>(
    src: &Array2<T>,
    row_kernel: &[T],
    col_kernel: &[T],
) -> Array2<T> {
    let (h, w) = src.dim();
    let rr = row_kernel.len() / 2;
    let rc = (col_kernel.len() / 2) as isize;
    let src = src.as_standard_layout();
    let data = src.as_slice().expect("standard layout");

    let mut tmp = vec![T::zero(); h * w];
    let mut padded = vec![T::zero(); w + 2 * rr];
    for y in 0..h {
        let row = &data[y * w..(y + 1) * w];
        for (i, p) in padded.iter_mut().enumerate() {
            *p = row[clamp_index(i as isize - rr as isize, w)];
        }
        for (x, out) in tmp[y * w..(y + 1) * w].iter_mut().enumerate() {
            *out = row_kernel
                .iter()
                .zip(&padded[x..x + row_kernel.len()])
                .fold(T::zero(), |acc, (&g, &v)| acc + g * v);
        }
    }

    let mut out = vec![T::zero(); h * w];
    for y in 0..h {
        let dst = &mut out[y * w..(y + 1) * w];
        for (k, &g) in col_kernel.iter().enumerate() {
            let sy = clamp_index(y as isize + k as isize - rc, h);
            for (d, &v) in dst.iter_mut().zip(&tmp[sy * w..(sy + 1) * w]) {
                *d += g * v;
            }
        }
    }
    Array2::from_shape_vec((h, w), out).expect("shape matches buffer")
}

/// Bilinear sample at real coordinates, clamped to the grid.
#[inline]
pub(crate) fn sample_bilinear<T: Scalar>(src: &Array2<T>, x: T, y: T) -> T {
    let (h, w) = src.dim();
    let xmax = T::from_usize_lossy(w - 1);
    let ymax = T::from_usize_lossy(h - 1);
    let x = x.max(T::zero()).min(xmax);
    let y = y.max(T::zero()).min(ymax);
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let x0 = x0.to_usize().unwrap_or(0);
    let y0 = y0.to_usize().unwrap_or(0);
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let top = src[[y0, x0]] * (T::one() - fx) + src[[y0, x1]] * fx;
    let bottom = src[[y1, x0]] * (T::one() - fx) + src[[y1, x1]] * fx;
    top * (T::one() - fy) + bottom * fy
}

/// Resizes with half-pixel-centered bilinear interpolation.
pub fn resize_bilinear<T: Scalar>(src: &Array2<T>, height: usize, width: usize) -> Array2<T> {
    let (h, w) = src.dim();
    let sx = T::from_usize_lossy(w) / T::from_usize_lossy(width);
    let sy = T::from_usize_lossy(h) / T::from_usize_lossy(height);
    let half = T::c(0.5);
    Array2::from_shape_fn((height, width), |(y, x)| {
        let fx = (T::from_usize_lossy(x) + half) * sx - half;
        let fy = (T::from_usize_lossy(y) + half) * sy - half;
        sample_bilinear(src, fx, fy)
    })
}
