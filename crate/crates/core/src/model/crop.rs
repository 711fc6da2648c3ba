use image::{ImageBuffer, Pixel};

use super::types::BoundingBox;
use crate::error::{Error, Result};

/// Pixel rectangle `[x, x + width) × [y, y + height)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CropRect {
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
}

/// Rounds half away from zero (`2.5 → 3`, `-2.5 → -3`).
#[inline]
pub fn round_half_away(v: f64) -> f64 {
    v.round()
}

/// Pixel rectangle covered by `bbox` on a `width × height` image.
///
/// Box edges are mapped to pixel space and rounded half away from zero, then
/// clamped to the image. A zero-area result is an error.
pub fn crop_rect(width: u32, height: u32, bbox: &BoundingBox, frame: &str) -> Result<CropRect> {
    let edge = |c: f64, s: f64, extent: u32| -> u32 {
        let v = round_half_away((c + s / 2.0) * f64::from(extent));
        v.clamp(0.0, f64::from(extent)) as u32
    };
    let x0 = edge(bbox.cx, -bbox.w, width);
    let x1 = edge(bbox.cx, bbox.w, width);
    let y0 = edge(bbox.cy, -bbox.h, height);
    let y1 = edge(bbox.cy, bbox.h, height);
    let (w, h) = (x1.saturating_sub(x0), y1.saturating_sub(y0));
    if w == 0 || h == 0 {
        return Err(Error::DegenerateCrop {
            frame: frame.to_string(),
            width: w,
            height: h,
        });
    }
    Ok(CropRect {
        x: x0,
        y: y0,
        width: w,
        height: h,
    })
}

/// Crops `image` to the detection box; `frame` names the frame in errors.
pub fn crop_frame<P>(
    image: &ImageBuffer<P, Vec<P::Subpixel>>,
    bbox: &BoundingBox,
    frame: &str,
) -> Result<ImageBuffer<P, Vec<P::Subpixel>>>
where
    P: Pixel + 'static,
{
    let (w, h) = image.dimensions();
    if w == 0 || h == 0 {
        return Err(Error::DegenerateCrop {
            frame: frame.to_string(),
            width: w,
            height: h,
        });
    }
    let r = crop_rect(w, h, bbox, frame)?;
    Ok(image::imageops::crop_imm(image, r.x, r.y, r.width, r.height).to_image())
}
