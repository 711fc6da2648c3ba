use std::path::{Path, PathBuf};

use image::DynamicImage;
use ndarray::Array2;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub fn frame_file_name(index: usize) -> String {
    format!("frame_{index:06}.png")
}

pub fn frame_path(frame_dir: &Path, index: usize) -> PathBuf {
    frame_dir.join(frame_file_name(index))
}

/// `Y = 0.299 R + 0.587 G + 0.114 B` on 8-bit channels, scaled to `[0, 1]`.
#[inline]
pub fn luminance(r: u8, g: u8, b: u8) -> f64 {
    (0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(b)) / 255.0
}

/// Converts a decoded frame to a `height × width` grayscale grid in `[0, 1]`.
pub fn to_gray<T: Scalar>(image: &DynamicImage) -> Array2<T> {
    match image {
        DynamicImage::ImageLuma8(g) => {
            let (w, h) = g.dimensions();
            Array2::from_shape_fn((h as usize, w as usize), |(y, x)| {
                T::c(f64::from(g.get_pixel(x as u32, y as u32).0[0]) / 255.0)
            })
        }
        other => {
            let rgb = other.to_rgb8();
            let (w, h) = rgb.dimensions();
            Array2::from_shape_fn((h as usize, w as usize), |(y, x)| {
                let [r, g, b] = rgb.get_pixel(x as u32, y as u32).0;
                T::c(luminance(r, g, b))
            })
        }
    }
}

pub fn load_gray_frame<T: Scalar>(path: &Path) -> Result<Array2<T>> {
    let img = image::open(path).map_err(|e| Error::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(to_gray(&img))
}
