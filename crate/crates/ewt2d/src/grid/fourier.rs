//! Unitary 2D DFT with a center-origin spectrum convention.

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::{FrequencyGrid, Image};
use crate::error::{EwtError, Result};

/// Complex 2D grid holding the DFT of an image, origin at the center pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    width: usize,
    height: usize,
    data: Vec<Complex64>,
}

impl Spectrum {
    pub fn new(width: usize, height: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(EwtError::InvalidParameter(
                "spectrum data length does not match dimensions".into(),
            ));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![Complex64::new(0.0, 0.0); width * height],
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Complex64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: Complex64) {
        self.data[y * self.width + x] = v;
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn grid(&self) -> FrequencyGrid {
        FrequencyGrid::new(self.width, self.height)
    }

    /// Magnitude raster |f^(xi)|.
    pub fn magnitude(&self) -> Image {
        Image::from_fn(self.width, self.height, |x, y| self.get(x, y).norm())
    }
}

/// Forward unitary DFT of a real image; output uses the center-origin
/// convention.
pub fn dft2_forward(img: &Image) -> Result<Spectrum> {
    let (w, h) = (img.width(), img.height());
    let mut data: Vec<Complex64> = img
        .as_slice()
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    fft2(&mut data, w, h, false);
    let scale = 1.0 / ((w * h) as f64).sqrt();
    for v in &mut data {
        *v *= scale;
    }
    let shifted = fftshift(&data, w, h);
    Spectrum::new(w, h, shifted)
}

/// Inverse unitary DFT back to a real image. The imaginary residue is
/// discarded; it is at machine-precision level for Hermitian spectra.
pub fn dft2_inverse(spec: &Spectrum) -> Result<Image> {
    let (w, h) = (spec.width(), spec.height());
    if !spec.as_slice().iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
        return Err(EwtError::NonFinite("spectrum data"));
    }
    let mut data = ifftshift(spec.as_slice(), w, h);
    fft2(&mut data, w, h, true);
    let scale = 1.0 / ((w * h) as f64).sqrt();
    let real: Vec<f64> = data.iter().map(|v| v.re * scale).collect();
    Image::new(w, h, real)
}

/// Largest imaginary magnitude after an inverse transform, used to detect
/// asymmetric filters.
pub(crate) fn dft2_inverse_with_residue(spec: &Spectrum) -> Result<(Image, f64)> {
    let (w, h) = (spec.width(), spec.height());
    let mut data = ifftshift(spec.as_slice(), w, h);
    fft2(&mut data, w, h, true);
    let scale = 1.0 / ((w * h) as f64).sqrt();
    let mut residue = 0.0f64;
    let mut real = Vec::with_capacity(w * h);
    for v in &data {
        real.push(v.re * scale);
        residue = residue.max((v.im * scale).abs());
    }
    Ok((Image::new(w, h, real)?, residue))
}

fn fft2(data: &mut [Complex64], w: usize, h: usize, inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let row_fft = if inverse {
        planner.plan_fft_inverse(w)
    } else {
        planner.plan_fft_forward(w)
    };
    for row in data.chunks_exact_mut(w) {
        row_fft.process(row);
    }
    let col_fft = if inverse {
        planner.plan_fft_inverse(h)
    } else {
        planner.plan_fft_forward(h)
    };
    let mut col = vec![Complex64::new(0.0, 0.0); h];
    for x in 0..w {
        for y in 0..h {
            col[y] = data[y * w + x];
        }
        col_fft.process(&mut col);
        for y in 0..h {
            data[y * w + x] = col[y];
        }
    }
}

fn shift_index(i: usize, c: usize, n: usize) -> usize {
    (i + c) % n
}

fn fftshift(data: &[Complex64], w: usize, h: usize) -> Vec<Complex64> {
    let (cx, cy) = (w / 2, h / 2);
    let mut out = vec![Complex64::new(0.0, 0.0); w * h];
    for y in 0..h {
        let sy = shift_index(y, cy, h);
        for x in 0..w {
            let sx = shift_index(x, cx, w);
            out[sy * w + sx] = data[y * w + x];
        }
    }
    out
}

fn ifftshift(data: &[Complex64], w: usize, h: usize) -> Vec<Complex64> {
    let (cx, cy) = (w / 2, h / 2);
    let mut out = vec![Complex64::new(0.0, 0.0); w * h];
    for y in 0..h {
        let sy = shift_index(y, cy, h);
        for x in 0..w {
            let sx = shift_index(x, cx, w);
            out[y * w + x] = data[sy * w + sx];
        }
    }
    out
}
