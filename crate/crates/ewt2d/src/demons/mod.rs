//! Demons registration of Fourier-support indicators onto the kernel
//! support: Thirion's, additive and diffeomorphic variants with
//! multiresolution pyramids.
//!
//! Registration is phrased generically over a fixed and a moving image:
//! the estimated field `d` satisfies `moving(p + d(p)) ~ fixed(p)`. For
//! filter construction the region indicator is the fixed image and the
//! kernel-support indicator the moving one, so the total map sends region
//! pixels into kernel-support coordinates as the wavelet definitions
//! require.

mod register;

pub use register::{
    demons_force, demons_register, exp_field, multires_register, register_partition,
    select_params, RegionRecord,
};

use serde::{Deserialize, Serialize};

use crate::error::{EwtError, Result};
use crate::grid::{gaussian_smooth_image, DisplacementField, FrequencyGrid, Image};
use crate::kernels::KernelKind;
use crate::partition::Partition;

/// Demons variant selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Thirion,
    Additive,
    Diffeomorphic,
}

impl std::str::FromStr for Variant {
    type Err = EwtError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "thirion" => Ok(Variant::Thirion),
            "additive" => Ok(Variant::Additive),
            "diffeomorphic" => Ok(Variant::Diffeomorphic),
            other => Err(EwtError::InvalidParameter(format!(
                "unknown demons variant '{other}'"
            ))),
        }
    }
}

/// Registration parameters; defaults follow the experimental set-up of the
/// reference evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemonsParams {
    /// Maximum-step control.
    pub sigma_x: f64,
    /// Intensity uncertainty.
    pub sigma_i: f64,
    /// Fluid-like smoothing std (applied to the update).
    pub sigma_f: f64,
    /// Diffusion-like smoothing std (applied to the field).
    pub sigma_d: f64,
    /// Relative stop threshold on the 5-iteration energy change.
    pub epsilon: f64,
    /// Maximum iterations per resolution level.
    pub max_iterations: usize,
    pub variant: Variant,
    /// Pyramid levels.
    pub n_level: usize,
}

impl Default for DemonsParams {
    fn default() -> Self {
        Self {
            sigma_x: 5.0,
            sigma_i: 1.0,
            sigma_f: 1.0,
            sigma_d: 0.4,
            epsilon: 1e-3,
            max_iterations: 500,
            variant: Variant::Additive,
            n_level: 3,
        }
    }
}

impl DemonsParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_x > 0.0 && self.sigma_i > 0.0 && self.sigma_f > 0.0 && self.sigma_d > 0.0)
        {
            return Err(EwtError::InvalidParameter(
                "all demons sigmas must be positive".into(),
            ));
        }
        if !(self.epsilon > 0.0) {
            return Err(EwtError::InvalidParameter(
                "epsilon must be positive".into(),
            ));
        }
        if self.max_iterations < 5 {
            return Err(EwtError::InvalidParameter(
                "max_iterations must be at least 5".into(),
            ));
        }
        if self.n_level < 1 {
            return Err(EwtError::InvalidParameter(
                "n_level must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Affine initialization: translation plus isotropic scale, stored for
/// reporting alongside the total field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineInit {
    pub scale: f64,
    pub translation: (f64, f64),
}

impl AffineInit {
    pub fn identity() -> Self {
        Self {
            scale: 1.0,
            translation: (0.0, 0.0),
        }
    }
}

/// Estimated mapping for one region: the total displacement field
/// (affine initialization already composed in) plus diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct MappingEstimate {
    pub field: DisplacementField,
    pub init_affine: AffineInit,
    pub final_energy: f64,
    pub iterations: usize,
    pub rmse: f64,
}

impl MappingEstimate {
    pub fn identity(width: usize, height: usize) -> Self {
        Self {
            field: DisplacementField::zeros(width, height),
            init_affine: AffineInit::identity(),
            final_energy: 0.0,
            iterations: 0,
            rmse: 0.0,
        }
    }

    /// Total map at a grid pixel: `p + d(p)`.
    #[inline]
    pub fn total(&self, x: f64, y: f64) -> (f64, f64) {
        let (dx, dy) = self.field.sample_clamped(x, y);
        (x + dx, y + dy)
    }
}

/// Kernel-support rendering radius in pixels for a grid.
pub fn r_target(grid: FrequencyGrid) -> f64 {
    0.35 * grid.width.min(grid.height) as f64 / 2.0
}

/// Renders the kernel support (disk of radius `r` or square of half-side
/// `r`) centered on the grid and smooths it with sigma = 1.
pub fn kernel_indicator(kind: KernelKind, grid: FrequencyGrid) -> Result<Image> {
    let r = r_target(grid);
    let (cx, cy) = grid.center();
    let raw = Image::from_fn(grid.width, grid.height, |x, y| {
        let dx = x as f64 - cx as f64;
        let dy = y as f64 - cy as f64;
        let inside = match kind {
            KernelKind::Disk => dx * dx + dy * dy <= r * r,
            KernelKind::Square => dx.abs() <= r && dy.abs() <= r,
        };
        if inside {
            1.0
        } else {
            0.0
        }
    });
    gaussian_smooth_image(&raw, 1.0)
}

/// Renders the indicator of one partition region (label `n` exactly) and
/// smooths it with sigma = 1. Errors on empty regions.
pub fn region_indicator(partition: &Partition, n: i32) -> Result<Image> {
    let grid = partition.grid;
    let mut raw = Image::zeros(grid.width, grid.height);
    let mut count = 0usize;
    for y in 0..grid.height {
        for x in 0..grid.width {
            if partition.label_at(x, y) == n {
                raw.set(x, y, 1.0);
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(EwtError::InvalidParameter(format!(
            "region {n} is empty"
        )));
    }
    gaussian_smooth_image(&raw, 1.0)
}

/// Kernel-support area in pixels for the rendered radius.
fn kernel_area(kind: KernelKind, r: f64) -> f64 {
    match kind {
        KernelKind::Disk => std::f64::consts::PI * r * r,
        KernelKind::Square => 4.0 * r * r,
    }
}

/// Affine initialization for registering region `n` onto the kernel
/// support: the induced field samples the moving (kernel) image such that
/// the region's centroid lands on the grid center with matching area.
///
/// The returned displacement field realizes `gamma(p) = c + s (p - q)`
/// with `q` the region centroid, `c` the grid center and
/// `s = sqrt(area_kernel / area_region)`.
pub fn init_affine(
    region_pixels: &[(usize, usize)],
    kind: KernelKind,
    grid: FrequencyGrid,
) -> Result<(DisplacementField, AffineInit)> {
    if region_pixels.len() < 4 {
        return Err(EwtError::InvalidParameter(format!(
            "degenerate region: {} px (need at least 4)",
            region_pixels.len()
        )));
    }
    let n = region_pixels.len() as f64;
    let qx = region_pixels.iter().map(|&(x, _)| x as f64).sum::<f64>() / n;
    let qy = region_pixels.iter().map(|&(_, y)| y as f64).sum::<f64>() / n;
    let (cx, cy) = grid.center();
    let (cx, cy) = (cx as f64, cy as f64);
    let s = (kernel_area(kind, r_target(grid)) / n).sqrt();

    let field = DisplacementField::from_fn(grid.width, grid.height, |x, y| {
        let gx = cx + s * (x as f64 - qx);
        let gy = cy + s * (y as f64 - qy);
        (gx - x as f64, gy - y as f64)
    });
    let init = AffineInit {
        scale: s,
        translation: (cx - qx, cy - qy),
    };
    Ok((field, init))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_indicator_is_soft_plateau() {
        let grid = FrequencyGrid::new(64, 64);
        let ind = kernel_indicator(KernelKind::Disk, grid).unwrap();
        let (cx, cy) = grid.center();
        assert!((ind.get(cx, cy) - 1.0).abs() < 1e-9);
        assert!(ind.get(0, 0).abs() < 1e-9);
        assert!(ind.min() >= -1e-12 && ind.max() <= 1.0 + 1e-12);
    }

    #[test]
    fn init_affine_identity_when_centered_with_matching_area() {
        let grid = FrequencyGrid::new(64, 64);
        let r = r_target(grid);
        let (cx, cy) = grid.center();
        // Synthesize a disk region of exactly the kernel area.
        let mut pixels = Vec::new();
        for y in 0..64usize {
            for x in 0..64usize {
                let dx = x as f64 - cx as f64;
                let dy = y as f64 - cy as f64;
                if dx * dx + dy * dy <= r * r {
                    pixels.push((x, y));
                }
            }
        }
        let (field, init) = init_affine(&pixels, KernelKind::Disk, grid).unwrap();
        // Rasterized disk area differs slightly from pi r^2; the scale is
        // near 1 and the translation near 0.
        assert!((init.scale - 1.0).abs() < 0.02, "scale {}", init.scale);
        assert!(init.translation.0.abs() < 0.5 && init.translation.1.abs() < 0.5);
        assert!(field.max_norm() < 2.0);
    }

    #[test]
    fn init_affine_translated_copy_gives_pure_translation() {
        let grid = FrequencyGrid::new(64, 64);
        // Small square blob of 16 px at centroid (20, 24); kernel is a
        // square so area scaling is exact.
        let mut pixels = Vec::new();
        for y in 23..27usize {
            for x in 19..23usize {
                pixels.push((x, y));
            }
        }
        let (field, init) = init_affine(&pixels, KernelKind::Square, grid).unwrap();
        // Area ratio (2r)^2 / 16 = scale^2.
        let r = r_target(grid);
        assert!((init.scale - (4.0 * r * r / 16.0).sqrt()).abs() < 1e-12);
        assert!((init.translation.0 - (32.0 - 20.5)).abs() < 1e-9);
        assert!((init.translation.1 - (32.0 - 24.5)).abs() < 1e-9);
        // Field at the centroid is the centroid offset.
        let (dx, dy) = field.sample_clamped(20.5, 24.5);
        assert!((dx - init.translation.0).abs() < 1e-9);
        assert!((dy - init.translation.1).abs() < 1e-9);
    }

    #[test]
    fn init_affine_area_ratio_four_gives_scale_two() {
        let grid = FrequencyGrid::new(64, 64);
        let r = r_target(grid);
        // Region with exactly a quarter of the square kernel area.
        let side = (r * r).sqrt() as usize; // (2r)^2 / 4 = r^2 pixels
        let mut pixels = Vec::new();
        for y in 0..side {
            for x in 0..side {
                pixels.push((x + 10, y + 10));
            }
        }
        let (_, init) = init_affine(&pixels, KernelKind::Square, grid).unwrap();
        let expected = (4.0 * r * r / (side * side) as f64).sqrt();
        assert!((init.scale - expected).abs() < 1e-12);
    }

    #[test]
    fn degenerate_region_is_rejected() {
        let grid = FrequencyGrid::new(64, 64);
        assert!(init_affine(&[(1, 1), (2, 2)], KernelKind::Disk, grid).is_err());
    }
}
