//! Shared raster infrastructure: images, displacement fields, frequency
//! grids, transforms, interpolation, smoothing and resampling.

mod fourier;
mod interp;
pub mod io;
mod smooth;

pub use fourier::{dft2_forward, dft2_inverse, Spectrum};
pub(crate) use fourier::dft2_inverse_with_residue;
pub use interp::{bilinear_sample, sample_clamped, warp};
pub use smooth::{
    downsample_field, downsample_image, gaussian_smooth_field, gaussian_smooth_image,
    upsample_field, upsample_image,
};

use crate::error::{EwtError, Result};

/// Smallest accepted side length for images and fields.
pub const MIN_DIM: usize = 8;

/// Real-valued 2D raster, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width < MIN_DIM || height < MIN_DIM {
            return Err(EwtError::InvalidParameter(format!(
                "image dimensions must be at least {MIN_DIM}, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(EwtError::InvalidParameter(format!(
                "data length {} does not match {width}x{height}",
                data.len()
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(EwtError::NonFinite("image data"));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::constant(width, height, 0.0)
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Self {
        assert!(width >= MIN_DIM && height >= MIN_DIM, "image too small");
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(width >= MIN_DIM && height >= MIN_DIM, "image too small");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
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
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn same_dims(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Image {
        Image {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Linearly rescales values to `[0, 1]`; a constant image maps to 0.
    pub fn rescale_unit(&self) -> Image {
        let lo = self.min();
        let hi = self.max();
        let span = hi - lo;
        if span <= 0.0 {
            return Image::zeros(self.width, self.height);
        }
        self.map(|v| (v - lo) / span)
    }
}

/// Per-pixel 2-vector of displacements in pixel units.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementField {
    width: usize,
    height: usize,
    dx: Vec<f64>,
    dy: Vec<f64>,
}

impl DisplacementField {
    pub fn zeros(width: usize, height: usize) -> Self {
        assert!(width >= MIN_DIM && height >= MIN_DIM, "field too small");
        Self {
            width,
            height,
            dx: vec![0.0; width * height],
            dy: vec![0.0; width * height],
        }
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> (f64, f64),
    ) -> Self {
        let mut field = Self::zeros(width, height);
        for y in 0..height {
            for x in 0..width {
                let (dx, dy) = f(x, y);
                field.dx[y * width + x] = dx;
                field.dy[y * width + x] = dy;
            }
        }
        field
    }

    pub fn from_parts(width: usize, height: usize, dx: Vec<f64>, dy: Vec<f64>) -> Result<Self> {
        if width < MIN_DIM || height < MIN_DIM {
            return Err(EwtError::InvalidParameter(format!(
                "field dimensions must be at least {MIN_DIM}, got {width}x{height}"
            )));
        }
        if dx.len() != width * height || dy.len() != width * height {
            return Err(EwtError::InvalidParameter(
                "field component length does not match dimensions".into(),
            ));
        }
        if !dx.iter().chain(dy.iter()).all(|v| v.is_finite()) {
            return Err(EwtError::NonFinite("displacement field"));
        }
        Ok(Self {
            width,
            height,
            dx,
            dy,
        })
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
    pub fn get(&self, x: usize, y: usize) -> (f64, f64) {
        let i = y * self.width + x;
        (self.dx[i], self.dy[i])
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, dx: f64, dy: f64) {
        let i = y * self.width + x;
        self.dx[i] = dx;
        self.dy[i] = dy;
    }

    pub fn dx(&self) -> &[f64] {
        &self.dx
    }

    pub fn dy(&self) -> &[f64] {
        &self.dy
    }

    /// Bilinear sample of both components with edge clamping.
    pub fn sample_clamped(&self, x: f64, y: f64) -> (f64, f64) {
        (
            sample_component_clamped(&self.dx, self.width, self.height, x, y),
            sample_component_clamped(&self.dy, self.width, self.height, x, y),
        )
    }

    /// Largest Euclidean norm over the field.
    pub fn max_norm(&self) -> f64 {
        self.dx
            .iter()
            .zip(&self.dy)
            .map(|(&a, &b)| (a * a + b * b).sqrt())
            .fold(0.0, f64::max)
    }

    pub fn scaled(&self, s: f64) -> DisplacementField {
        DisplacementField {
            width: self.width,
            height: self.height,
            dx: self.dx.iter().map(|v| v * s).collect(),
            dy: self.dy.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add(&self, other: &DisplacementField) -> DisplacementField {
        assert_eq!(self.width, other.width);
        assert_eq!(self.height, other.height);
        DisplacementField {
            width: self.width,
            height: self.height,
            dx: self.dx.iter().zip(&other.dx).map(|(a, b)| a + b).collect(),
            dy: self.dy.iter().zip(&other.dy).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn same_dims(&self, other: &DisplacementField) -> bool {
        self.width == other.width && self.height == other.height
    }
}

fn sample_component_clamped(data: &[f64], w: usize, h: usize, x: f64, y: f64) -> f64 {
    let xc = x.clamp(0.0, (w - 1) as f64);
    let yc = y.clamp(0.0, (h - 1) as f64);
    let x0 = xc.floor() as usize;
    let y0 = yc.floor() as usize;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let fx = xc - x0 as f64;
    let fy = yc - y0 as f64;
    let v00 = data[y0 * w + x0];
    let v10 = data[y0 * w + x1];
    let v01 = data[y1 * w + x0];
    let v11 = data[y1 * w + x1];
    v00 * (1.0 - fx) * (1.0 - fy) + v10 * fx * (1.0 - fy) + v01 * (1.0 - fx) * fy + v11 * fx * fy
}

/// Center-origin frequency grid: the center pixel maps to frequency (0, 0).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrequencyGrid {
    pub width: usize,
    pub height: usize,
}

impl FrequencyGrid {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height }
    }

    /// Center pixel (the origin of the frequency plane).
    #[inline]
    pub fn center(&self) -> (usize, usize) {
        (self.width / 2, self.height / 2)
    }

    /// Normalized frequency of a pixel, in `[-1/2, 1/2)` per axis.
    #[inline]
    pub fn freq(&self, x: usize, y: usize) -> (f64, f64) {
        let (cx, cy) = self.center();
        (
            (x as f64 - cx as f64) / self.width as f64,
            (y as f64 - cy as f64) / self.height as f64,
        )
    }

    /// Pixel holding the mirrored frequency -xi. For even dimensions the
    /// Nyquist row/column maps to itself.
    #[inline]
    pub fn mirror(&self, x: usize, y: usize) -> (usize, usize) {
        let (cx, cy) = self.center();
        let mx = (2 * cx as isize - x as isize).rem_euclid(self.width as isize) as usize;
        let my = (2 * cy as isize - y as isize).rem_euclid(self.height as isize) as usize;
        (mx, my)
    }
}
