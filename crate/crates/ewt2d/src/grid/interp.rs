//! Bilinear interpolation and displacement-field warping.

use super::{DisplacementField, Image};
use crate::error::{EwtError, Result};

/// Bilinear sample with the zero-padding convention: points outside the
/// grid contribute 0.
pub fn bilinear_sample(img: &Image, x: f64, y: f64) -> f64 {
    let w = img.width() as isize;
    let h = img.height() as isize;
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let x0 = x0 as isize;
    let y0 = y0 as isize;
    let at = |xi: isize, yi: isize| -> f64 {
        if xi < 0 || yi < 0 || xi >= w || yi >= h {
            0.0
        } else {
            img.get(xi as usize, yi as usize)
        }
    };
    at(x0, y0) * (1.0 - fx) * (1.0 - fy)
        + at(x0 + 1, y0) * fx * (1.0 - fy)
        + at(x0, y0 + 1) * (1.0 - fx) * fy
        + at(x0 + 1, y0 + 1) * fx * fy
}

/// Bilinear sample with edge clamping, used for resampling where the
/// zero-padding convention would darken borders.
pub fn sample_clamped(img: &Image, x: f64, y: f64) -> f64 {
    let w = img.width();
    let h = img.height();
    let xc = x.clamp(0.0, (w - 1) as f64);
    let yc = y.clamp(0.0, (h - 1) as f64);
    let x0 = xc.floor() as usize;
    let y0 = yc.floor() as usize;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let fx = xc - x0 as f64;
    let fy = yc - y0 as f64;
    img.get(x0, y0) * (1.0 - fx) * (1.0 - fy)
        + img.get(x1, y0) * fx * (1.0 - fy)
        + img.get(x0, y1) * (1.0 - fx) * fy
        + img.get(x1, y1) * fx * fy
}

/// Warps an image by a displacement field: `out(p) = img(p + d(p))`.
pub fn warp(img: &Image, field: &DisplacementField) -> Result<Image> {
    if img.width() != field.width() || img.height() != field.height() {
        return Err(EwtError::DimensionMismatch {
            expected_w: img.width(),
            expected_h: img.height(),
            got_w: field.width(),
            got_h: field.height(),
        });
    }
    let mut out = Image::zeros(img.width(), img.height());
    for y in 0..img.height() {
        for x in 0..img.width() {
            let (dx, dy) = field.get(x, y);
            // Zero displacement reproduces the input bit-exactly.
            let v = if dx == 0.0 && dy == 0.0 {
                img.get(x, y)
            } else {
                bilinear_sample(img, x as f64 + dx, y as f64 + dy)
            };
            out.set(x, y, v);
        }
    }
    Ok(out)
}
