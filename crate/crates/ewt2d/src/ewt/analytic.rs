//! Closed-form frequency mappings with exact Jacobians, used to validate
//! the transform independently of any registration estimate.

use super::{FilterBank, FrequencyMapping, JACOBIAN_FLOOR};
use crate::demons::r_target;
use crate::error::Result;
use crate::grid::FrequencyGrid;
use crate::kernels::KernelSpec;

/// Affine mapping in centered pixel coordinates:
/// `p -> c + A (p - c) + t`. The Jacobian determinant is exact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMapping {
    /// Row-major 2x2 matrix [a11, a12, a21, a22].
    pub a: [f64; 4],
    /// Translation applied after the linear part, in pixels.
    pub t: (f64, f64),
    cx: f64,
    cy: f64,
}

impl AffineMapping {
    pub fn new(grid: FrequencyGrid, a: [f64; 4], t: (f64, f64)) -> Self {
        let (cx, cy) = grid.center();
        Self {
            a,
            t,
            cx: cx as f64,
            cy: cy as f64,
        }
    }

    pub fn identity(grid: FrequencyGrid) -> Self {
        Self::new(grid, [1.0, 0.0, 0.0, 1.0], (0.0, 0.0))
    }

    /// Pure shift: a frequency at offset `-t` from the center lands on the
    /// kernel center.
    pub fn translation(grid: FrequencyGrid, t: (f64, f64)) -> Self {
        Self::new(grid, [1.0, 0.0, 0.0, 1.0], t)
    }

    /// Anisotropic axis-aligned scaling about the center.
    pub fn scaling(grid: FrequencyGrid, sx: f64, sy: f64) -> Self {
        Self::new(grid, [sx, 0.0, 0.0, sy], (0.0, 0.0))
    }

    pub fn det(&self) -> f64 {
        self.a[0] * self.a[3] - self.a[1] * self.a[2]
    }
}

impl FrequencyMapping for AffineMapping {
    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let (u, v) = (x - self.cx, y - self.cy);
        (
            self.cx + self.a[0] * u + self.a[1] * v + self.t.0,
            self.cy + self.a[2] * u + self.a[3] * v + self.t.1,
        )
    }

    fn jacobian_abs_det(&self, _x: f64, _y: f64) -> f64 {
        self.det().abs().max(JACOBIAN_FLOOR)
    }
}

/// Radial band mapping: sends the annulus of center radius `ring_center`
/// and width `width` (pixels) onto the kernel support. Along each ray the
/// radial offset is rescaled so that the annulus edges land on kernel
/// radius 1/2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialBandMapping {
    pub ring_center: f64,
    pub width: f64,
    cx: f64,
    cy: f64,
    /// Kernel rendering radius of the grid (kernel unit 1/2 in pixels).
    r: f64,
}

impl RadialBandMapping {
    pub fn new(grid: FrequencyGrid, ring_center: f64, width: f64) -> Self {
        let (cx, cy) = grid.center();
        Self {
            ring_center,
            width,
            cx: cx as f64,
            cy: cy as f64,
            r: r_target(grid),
        }
    }

    /// Signed radial image `f(rho) = 2 r (rho - ring_center) / width`.
    fn radial(&self, rho: f64) -> f64 {
        2.0 * self.r * (rho - self.ring_center) / self.width
    }
}

impl FrequencyMapping for RadialBandMapping {
    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let (u, v) = (x - self.cx, y - self.cy);
        let rho = (u * u + v * v).sqrt();
        if rho < 1e-9 {
            // Degenerate ray at the exact center: send it far outside the
            // kernel support (the annulus never contains the origin).
            return (self.cx + self.radial(0.0), self.cy);
        }
        let f = self.radial(rho);
        (self.cx + u / rho * f, self.cy + v / rho * f)
    }

    fn jacobian_abs_det(&self, x: f64, y: f64) -> f64 {
        // For a radial map f(rho) * u/rho the determinant is f'(rho) f(rho) / rho.
        let (u, v) = (x - self.cx, y - self.cy);
        let rho = (u * u + v * v).sqrt().max(1e-9);
        let fp = 2.0 * self.r / self.width;
        (fp * self.radial(rho) / rho).abs().max(JACOBIAN_FLOOR)
    }
}

/// Analytic concentric bank: a center disk (label 0) plus `n_rings`
/// annuli with spacing equal to their width, sized so the outermost ring's
/// plateau reaches the grid corners. Adjacent transition bands form an
/// exact partition of unity of squares along each ray, so coverage is
/// bounded away from zero on the whole grid.
pub fn annulus_bank(
    grid: FrequencyGrid,
    kernel: KernelSpec,
    n_rings: usize,
    normalized: bool,
) -> Result<FilterBank> {
    let (cx, cy) = grid.center();
    let rho_max = ((cx * cx + cy * cy) as f64).sqrt() + 0.5;
    // Plateau edge of ring N at (N + 1/2 - tau) w must reach rho_max.
    let width = rho_max / (n_rings as f64 + 0.5 - kernel.tau);
    let disk = AffineMapping::scaling(grid, 2.0 * r_target(grid) / width, 2.0 * r_target(grid) / width);
    let rings: Vec<RadialBandMapping> = (1..=n_rings)
        .map(|i| RadialBandMapping::new(grid, i as f64 * width, width))
        .collect();
    let mut mappings: Vec<(i32, &dyn FrequencyMapping)> = vec![(0, &disk)];
    for (i, ring) in rings.iter().enumerate() {
        mappings.push((i as i32 + 1, ring));
    }
    FilterBank::from_mappings(grid, kernel, &mappings, normalized)
}
