//! Separable Gaussian smoothing and pyramid resampling.

use super::{sample_clamped, DisplacementField, Image, MIN_DIM};
use crate::error::{EwtError, Result};

/// Discrete Gaussian kernel truncated at radius ceil(3 sigma) and
/// renormalized to unit sum.
fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as usize;
    let mut k = Vec::with_capacity(2 * radius + 1);
    let inv = 1.0 / (2.0 * sigma * sigma);
    for i in -(radius as isize)..=(radius as isize) {
        k.push((-(i * i) as f64 * inv).exp());
    }
    let sum: f64 = k.iter().sum();
    for v in &mut k {
        *v /= sum;
    }
    k
}

fn convolve_separable(data: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    let radius = kernel.len() / 2;
    let mut tmp = vec![0.0; w * h];
    // Horizontal pass, replicate-edge boundary.
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (j, &kv) in kernel.iter().enumerate() {
                let xi = (x as isize + j as isize - radius as isize).clamp(0, w as isize - 1);
                acc += kv * data[y * w + xi as usize];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    // Vertical pass.
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (j, &kv) in kernel.iter().enumerate() {
                let yi = (y as isize + j as isize - radius as isize).clamp(0, h as isize - 1);
                acc += kv * tmp[yi as usize * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Gaussian smoothing of an image. `sigma = 0` is the identity.
pub fn gaussian_smooth_image(img: &Image, sigma: f64) -> Result<Image> {
    if sigma < 0.0 || !sigma.is_finite() {
        return Err(EwtError::InvalidParameter(format!(
            "gaussian sigma must be non-negative, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(img.clone());
    }
    let kernel = gaussian_kernel(sigma);
    let data = convolve_separable(img.as_slice(), img.width(), img.height(), &kernel);
    Image::new(img.width(), img.height(), data)
}

/// Gaussian smoothing of a displacement field, per component.
pub fn gaussian_smooth_field(field: &DisplacementField, sigma: f64) -> Result<DisplacementField> {
    if sigma < 0.0 || !sigma.is_finite() {
        return Err(EwtError::InvalidParameter(format!(
            "gaussian sigma must be non-negative, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(field.clone());
    }
    let kernel = gaussian_kernel(sigma);
    let (w, h) = (field.width(), field.height());
    let dx = convolve_separable(field.dx(), w, h, &kernel);
    let dy = convolve_separable(field.dy(), w, h, &kernel);
    DisplacementField::from_parts(w, h, dx, dy)
}

fn check_factor(factor: usize) -> Result<()> {
    if factor == 0 || !factor.is_power_of_two() {
        return Err(EwtError::InvalidParameter(format!(
            "resampling factor must be a power of two, got {factor}"
        )));
    }
    Ok(())
}

/// Downsampling: Gaussian pre-smoothing with sigma = factor / 2 followed by
/// decimation. Errors when the result would fall below the minimum size.
pub fn downsample_image(img: &Image, factor: usize) -> Result<Image> {
    check_factor(factor)?;
    if factor == 1 {
        return Ok(img.clone());
    }
    let (w, h) = (img.width() / factor, img.height() / factor);
    if w < MIN_DIM || h < MIN_DIM {
        return Err(EwtError::InvalidParameter(format!(
            "downsampling by {factor} would give {w}x{h}, below the {MIN_DIM} px minimum"
        )));
    }
    let smoothed = gaussian_smooth_image(img, factor as f64 / 2.0)?;
    Ok(Image::from_fn(w, h, |x, y| {
        smoothed.get(x * factor, y * factor)
    }))
}

/// Bilinear magnification to the target size (edge-clamped sampling so
/// constants are preserved).
pub fn upsample_image(img: &Image, target_w: usize, target_h: usize) -> Image {
    let sx = img.width() as f64 / target_w as f64;
    let sy = img.height() as f64 / target_h as f64;
    Image::from_fn(target_w, target_h, |x, y| {
        let u = (x as f64 + 0.5) * sx - 0.5;
        let v = (y as f64 + 0.5) * sy - 0.5;
        sample_clamped(img, u, v)
    })
}

/// Field analogue of [`downsample_image`]; component values are not
/// rescaled here, the caller applies the pyramid scaling rule.
pub fn downsample_field(field: &DisplacementField, factor: usize) -> Result<DisplacementField> {
    check_factor(factor)?;
    if factor == 1 {
        return Ok(field.clone());
    }
    let (w, h) = (field.width() / factor, field.height() / factor);
    if w < MIN_DIM || h < MIN_DIM {
        return Err(EwtError::InvalidParameter(format!(
            "downsampling by {factor} would give {w}x{h}, below the {MIN_DIM} px minimum"
        )));
    }
    let smoothed = gaussian_smooth_field(field, factor as f64 / 2.0)?;
    Ok(DisplacementField::from_fn(w, h, |x, y| {
        smoothed.get(x * factor, y * factor)
    }))
}

/// Field analogue of [`upsample_image`].
pub fn upsample_field(
    field: &DisplacementField,
    target_w: usize,
    target_h: usize,
) -> DisplacementField {
    let sx = field.width() as f64 / target_w as f64;
    let sy = field.height() as f64 / target_h as f64;
    DisplacementField::from_fn(target_w, target_h, |x, y| {
        let u = (x as f64 + 0.5) * sx - 0.5;
        let v = (y as f64 + 0.5) * sy - 0.5;
        field.sample_clamped(u, v)
    })
}
