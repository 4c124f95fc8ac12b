//! Empirical wavelet filter banks: filter construction from frequency
//! mappings, the forward transform and dual-frame reconstruction.
//!
//! Filters live on the center-origin frequency grid. A mapping sends a
//! grid pixel into kernel-support pixel coordinates; the shared rendering
//! scale (kernel unit 1/2 corresponds to `r_target` pixels) converts those
//! into kernel units where the analytic band-pass kernel is evaluated.

pub mod analytic;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::demons::{r_target, MappingEstimate};
use crate::error::{EwtError, Result};
use crate::grid::{dft2_forward, DisplacementField, FrequencyGrid, Image, Spectrum};
use crate::kernels::KernelSpec;

/// Floor applied to numeric Jacobian determinants.
pub const JACOBIAN_FLOOR: f64 = 1e-8;
/// Coverage floor in the dual-frame division.
pub const COVERAGE_DELTA: f64 = 1e-12;
/// Coverage below this is counted as a hole.
pub const HOLE_THRESHOLD: f64 = 1e-6;
/// Largest hole fraction for a reconstruction-safe bank.
pub const SAFE_HOLE_FRACTION: f64 = 1e-3;
/// Largest tolerated imaginary residue of a coefficient image.
pub const RESIDUE_TOLERANCE: f64 = 1e-10;

/// A frequency-plane mapping in pixel coordinates: grid pixel to
/// kernel-support pixel, with the absolute Jacobian determinant of that
/// pixel-to-pixel map.
pub trait FrequencyMapping: Sync {
    fn map(&self, x: f64, y: f64) -> (f64, f64);
    fn jacobian_abs_det(&self, x: f64, y: f64) -> f64;
}

/// Mapping realized by an estimated displacement field; the Jacobian is
/// precomputed by finite differences.
pub struct FieldMapping {
    field: DisplacementField,
    det: Image,
}

impl FieldMapping {
    pub fn new(field: DisplacementField) -> Self {
        let det = jacobian_det_field(&field);
        Self { field, det }
    }

    pub fn from_estimate(est: &MappingEstimate) -> Self {
        Self::new(est.field.clone())
    }

    pub fn field(&self) -> &DisplacementField {
        &self.field
    }
}

impl FrequencyMapping for FieldMapping {
    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let (dx, dy) = self.field.sample_clamped(x, y);
        (x + dx, y + dy)
    }

    fn jacobian_abs_det(&self, x: f64, y: f64) -> f64 {
        crate::grid::sample_clamped(&self.det, x, y).max(JACOBIAN_FLOOR)
    }
}

/// The mirrored mapping `-gamma(-xi)`, in pixel coordinates a point
/// reflection of both domain and codomain through the grid center.
pub struct Mirrored<'a> {
    inner: &'a dyn FrequencyMapping,
    cx: f64,
    cy: f64,
}

impl<'a> Mirrored<'a> {
    pub fn new(inner: &'a dyn FrequencyMapping, grid: FrequencyGrid) -> Self {
        let (cx, cy) = grid.center();
        Self {
            inner,
            cx: cx as f64,
            cy: cy as f64,
        }
    }
}

impl FrequencyMapping for Mirrored<'_> {
    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let (mx, my) = self.inner.map(2.0 * self.cx - x, 2.0 * self.cy - y);
        (2.0 * self.cx - mx, 2.0 * self.cy - my)
    }

    fn jacobian_abs_det(&self, x: f64, y: f64) -> f64 {
        // Point reflections on both sides leave |det J| unchanged.
        self.inner
            .jacobian_abs_det(2.0 * self.cx - x, 2.0 * self.cy - y)
    }
}

/// Mirrors a mapping estimate into a concrete field: the mirrored total
/// map is `p -> 2c - Gamma(2c - p)`, i.e. displacement `-d(2c - p)`.
pub fn mirror_mapping(est: &MappingEstimate, grid: FrequencyGrid) -> MappingEstimate {
    let (cx, cy) = grid.center();
    let (cx, cy) = (cx as f64, cy as f64);
    let field = DisplacementField::from_fn(est.field.width(), est.field.height(), |x, y| {
        let (dx, dy) = est
            .field
            .sample_clamped(2.0 * cx - x as f64, 2.0 * cy - y as f64);
        (-dx, -dy)
    });
    MappingEstimate {
        field,
        init_affine: est.init_affine,
        final_energy: est.final_energy,
        iterations: est.iterations,
        rmse: est.rmse,
    }
}

/// Per-pixel |det| of the Jacobian of the total map `p + d(p)`: central
/// differences in the interior, one-sided at borders, floored at 1e-8.
pub fn jacobian_det_field(field: &DisplacementField) -> Image {
    let (w, h) = (field.width(), field.height());
    Image::from_fn(w, h, |x, y| {
        // (derivative of component along axis, with the identity part).
        let diff = |get: &dyn Fn(usize, usize) -> f64, axis_x: bool| -> f64 {
            let (lo, hi, span) = if axis_x {
                let lo = x.saturating_sub(1);
                let hi = (x + 1).min(w - 1);
                (get(lo, y), get(hi, y), (hi - lo) as f64)
            } else {
                let lo = y.saturating_sub(1);
                let hi = (y + 1).min(h - 1);
                (get(x, lo), get(x, hi), (hi - lo) as f64)
            };
            (hi - lo) / span
        };
        let dx_fn = |px: usize, py: usize| field.get(px, py).0;
        let dy_fn = |px: usize, py: usize| field.get(px, py).1;
        let j11 = 1.0 + diff(&dx_fn, true);
        let j12 = diff(&dx_fn, false);
        let j21 = diff(&dy_fn, true);
        let j22 = 1.0 + diff(&dy_fn, false);
        (j11 * j22 - j12 * j21).abs().max(JACOBIAN_FLOOR)
    })
}

/// Convenience wrapper matching the estimate-level contract.
pub fn jacobian_det(est: &MappingEstimate) -> Image {
    jacobian_det_field(&est.field)
}

fn eval_deformed_kernel(
    grid: FrequencyGrid,
    kernel: &KernelSpec,
    mapping: &dyn FrequencyMapping,
    normalized: bool,
    x: usize,
    y: usize,
) -> f64 {
    let (cx, cy) = grid.center();
    let scale = 0.5 / r_target(grid);
    let (gx, gy) = mapping.map(x as f64, y as f64);
    let xi = ((gx - cx as f64) * scale, (gy - cy as f64) * scale);
    let v = kernel.eval(xi);
    if normalized {
        v * mapping.jacobian_abs_det(x as f64, y as f64).sqrt()
    } else {
        v
    }
}

/// Builds one filter. For `n = 0` (`dc = true`) the filter is the deformed
/// kernel itself; otherwise the mirrored mapping contributes the second
/// term of the symmetric sum, scaled by `1/sqrt(2)` in the normalized
/// variant. The result is made exactly mirror-symmetric by pixel-pair
/// averaging (Nyquist rows are self-mirrored).
pub fn build_filter(
    grid: FrequencyGrid,
    kernel: &KernelSpec,
    mapping: &dyn FrequencyMapping,
    normalized: bool,
    dc: bool,
) -> Image {
    let raw = if dc {
        Image::from_fn(grid.width, grid.height, |x, y| {
            eval_deformed_kernel(grid, kernel, mapping, normalized, x, y)
        })
    } else {
        let mirrored = Mirrored::new(mapping, grid);
        let weight = if normalized {
            std::f64::consts::FRAC_1_SQRT_2
        } else {
            1.0
        };
        Image::from_fn(grid.width, grid.height, |x, y| {
            let a = eval_deformed_kernel(grid, kernel, mapping, normalized, x, y);
            let b = eval_deformed_kernel(grid, kernel, &mirrored, normalized, x, y);
            weight * (a + b)
        })
    };
    // Hard symmetrization: guarantees real transform outputs independently
    // of interpolation asymmetries in the estimated mappings.
    let mut out = raw.clone();
    for y in 0..grid.height {
        for x in 0..grid.width {
            let (mx, my) = grid.mirror(x, y);
            out.set(x, y, 0.5 * (raw.get(x, y) + raw.get(mx, my)));
        }
    }
    out
}

/// Coverage diagnostics of an assembled bank.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BankDiagnostics {
    pub holes: usize,
    pub hole_fraction: f64,
    pub min_coverage: f64,
    pub max_coverage: f64,
    /// False when the hole fraction exceeds 0.1%; reconstruction through
    /// such a bank silently loses the uncovered frequencies.
    pub reconstruction_safe: bool,
}

/// An empirical wavelet filter bank: one real non-negative filter per
/// non-negative region label plus the summed coverage.
pub struct FilterBank {
    pub grid: FrequencyGrid,
    pub kernel: KernelSpec,
    pub normalized: bool,
    /// (label, filter), sorted by label.
    pub filters: Vec<(i32, Image)>,
    /// Pointwise sum of squared filters over the bank.
    pub coverage: Image,
    pub diagnostics: BankDiagnostics,
}

impl FilterBank {
    /// Assembles a bank from one mapping per non-negative label. Label 0
    /// is the base filter without a mirror term.
    pub fn from_mappings(
        grid: FrequencyGrid,
        kernel: KernelSpec,
        mappings: &[(i32, &dyn FrequencyMapping)],
        normalized: bool,
    ) -> Result<Self> {
        if mappings.is_empty() {
            return Err(EwtError::InvalidParameter(
                "filter bank needs at least one mapping".into(),
            ));
        }
        let mut filters: Vec<(i32, Image)> = mappings
            .par_iter()
            .map(|&(n, mapping)| {
                if n < 0 {
                    return Err(EwtError::InvalidParameter(format!(
                        "filter bank labels must be non-negative, got {n}"
                    )));
                }
                Ok((n, build_filter(grid, &kernel, mapping, normalized, n == 0)))
            })
            .collect::<Result<Vec<_>>>()?;
        filters.sort_by_key(|&(n, _)| n);
        Self::from_filters(grid, kernel, normalized, filters)
    }

    /// Wraps prebuilt filters, computing coverage and diagnostics.
    pub fn from_filters(
        grid: FrequencyGrid,
        kernel: KernelSpec,
        normalized: bool,
        filters: Vec<(i32, Image)>,
    ) -> Result<Self> {
        if filters.is_empty() {
            return Err(EwtError::InvalidParameter("empty filter bank".into()));
        }
        for (n, f) in &filters {
            if f.width() != grid.width || f.height() != grid.height {
                return Err(EwtError::DimensionMismatch {
                    expected_w: grid.width,
                    expected_h: grid.height,
                    got_w: f.width(),
                    got_h: f.height(),
                });
            }
            if !f.as_slice().iter().all(|v| v.is_finite() && *v >= 0.0) {
                return Err(EwtError::InvalidParameter(format!(
                    "filter {n} has negative or non-finite values"
                )));
            }
        }
        let mut coverage = Image::zeros(grid.width, grid.height);
        for (_, f) in &filters {
            for (c, &v) in coverage.as_mut_slice().iter_mut().zip(f.as_slice()) {
                *c += v * v;
            }
        }
        let holes = coverage
            .as_slice()
            .iter()
            .filter(|&&c| c < HOLE_THRESHOLD)
            .count();
        let total = (grid.width * grid.height) as f64;
        let hole_fraction = holes as f64 / total;
        let diagnostics = BankDiagnostics {
            holes,
            hole_fraction,
            min_coverage: coverage.min(),
            max_coverage: coverage.max(),
            reconstruction_safe: hole_fraction <= SAFE_HOLE_FRACTION,
        };
        Ok(Self {
            grid,
            kernel,
            normalized,
            filters,
            coverage,
            diagnostics,
        })
    }

    pub fn len(&self) -> usize {
        self.filters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filters.is_empty()
    }

    pub fn filter(&self, n: i32) -> Option<&Image> {
        self.filters
            .iter()
            .find(|&&(m, _)| m == n)
            .map(|(_, f)| f)
    }
}

/// Wavelet coefficients: one real image per bank filter.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet {
    pub grid: FrequencyGrid,
    /// (label, coefficient image), aligned with the bank's filters.
    pub bands: Vec<(i32, Image)>,
}

impl CoefficientSet {
    pub fn band(&self, n: i32) -> Option<&Image> {
        self.bands.iter().find(|&&(m, _)| m == n).map(|(_, b)| b)
    }
}

fn multiply_filter(spec: &Spectrum, filter: &Image) -> Spectrum {
    let mut out = spec.clone();
    for (v, &f) in out.as_mut_slice().iter_mut().zip(filter.as_slice()) {
        *v *= f;
    }
    out
}

/// Forward transform: per filter, the inverse DFT of the filtered
/// spectrum. Filters are real and mirror-symmetric, so the coefficients
/// are real; a residue above tolerance signals a construction bug.
pub fn forward(img: &Image, bank: &FilterBank) -> Result<CoefficientSet> {
    if img.width() != bank.grid.width || img.height() != bank.grid.height {
        return Err(EwtError::DimensionMismatch {
            expected_w: bank.grid.width,
            expected_h: bank.grid.height,
            got_w: img.width(),
            got_h: img.height(),
        });
    }
    let spec = dft2_forward(img)?;
    let bands: Vec<(i32, Image)> = bank
        .filters
        .par_iter()
        .map(|(n, filter)| {
            let product = multiply_filter(&spec, filter);
            let (band, residue) = crate::grid::dft2_inverse_with_residue(&product)?;
            if residue > RESIDUE_TOLERANCE {
                return Err(EwtError::Numeric(format!(
                    "filter {n} is not mirror-symmetric: imaginary residue {residue:.3e}"
                )));
            }
            Ok((*n, band))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CoefficientSet {
        grid: bank.grid,
        bands,
    })
}

/// Dual-frame reconstruction: pointwise in the Fourier domain,
/// `f^ = sum_n E^_n chi^_n / max(coverage, delta)`.
pub fn inverse(coeffs: &CoefficientSet, bank: &FilterBank) -> Result<Image> {
    if coeffs.bands.len() != bank.filters.len() {
        return Err(EwtError::InvalidParameter(format!(
            "coefficient count {} does not match bank size {}",
            coeffs.bands.len(),
            bank.filters.len()
        )));
    }
    let (w, h) = (bank.grid.width, bank.grid.height);
    let mut num = vec![Complex64::new(0.0, 0.0); w * h];
    // Fixed summation order over n keeps the reduction deterministic; the
    // per-band DFTs run in parallel.
    let specs: Vec<(i32, Spectrum)> = coeffs
        .bands
        .par_iter()
        .map(|(n, band)| Ok((*n, dft2_forward(band)?)))
        .collect::<Result<Vec<_>>>()?;
    for (n, spec) in &specs {
        let filter = bank.filter(*n).ok_or_else(|| {
            EwtError::InvalidParameter(format!("coefficient band {n} missing from the bank"))
        })?;
        for (acc, (v, &f)) in num
            .iter_mut()
            .zip(spec.as_slice().iter().zip(filter.as_slice()))
        {
            *acc += v * f;
        }
    }
    for (v, &c) in num.iter_mut().zip(bank.coverage.as_slice()) {
        *v /= c.max(COVERAGE_DELTA);
    }
    crate::grid::dft2_inverse(&Spectrum::new(w, h, num)?)
}

/// Builds a bank from per-region registration estimates (label 0 must be
/// present and becomes the base filter).
pub fn bank_from_registrations(
    grid: FrequencyGrid,
    kernel: KernelSpec,
    estimates: &[(i32, MappingEstimate)],
    normalized: bool,
) -> Result<FilterBank> {
    if !estimates.iter().any(|&(n, _)| n == 0) {
        return Err(EwtError::InvalidParameter(
            "registration set is missing region 0".into(),
        ));
    }
    let field_mappings: Vec<(i32, FieldMapping)> = estimates
        .par_iter()
        .map(|(n, est)| (*n, FieldMapping::from_estimate(est)))
        .collect();
    let refs: Vec<(i32, &dyn FrequencyMapping)> = field_mappings
        .iter()
        .map(|(n, m)| (*n, m as &dyn FrequencyMapping))
        .collect();
    FilterBank::from_mappings(grid, kernel, &refs, normalized)
}

/// Reference energy of the undeformed kernel rasterized at the identity
/// mapping: the denominator of the energy-conservation ratio.
pub fn kernel_reference_energy(grid: FrequencyGrid, kernel: &KernelSpec) -> f64 {
    let (cx, cy) = grid.center();
    let scale = 0.5 / r_target(grid);
    let mut sum = 0.0;
    for y in 0..grid.height {
        for x in 0..grid.width {
            let xi = (
                (x as f64 - cx as f64) * scale,
                (y as f64 - cy as f64) * scale,
            );
            let v = kernel.eval(xi);
            sum += v * v;
        }
    }
    sum
}

/// Energy-conservation ratio of filter `n`: grid energy of the filter over
/// the reference kernel energy. The integration domain is the symmetric
/// region pair; with compactly supported filters the full-grid sum
/// realizes it. Near 1 for diffeomorphic mappings in a normalized bank.
pub fn energy_ratio(n: i32, bank: &FilterBank) -> Result<f64> {
    let filter = bank
        .filter(n)
        .ok_or_else(|| EwtError::InvalidParameter(format!("no filter with label {n}")))?;
    let reference = kernel_reference_energy(bank.grid, &bank.kernel);
    if reference <= 0.0 {
        return Err(EwtError::Numeric("reference kernel energy is zero".into()));
    }
    Ok(filter.as_slice().iter().map(|&v| v * v).sum::<f64>() / reference)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelKind;
    use analytic::AffineMapping;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid64() -> FrequencyGrid {
        FrequencyGrid::new(64, 64)
    }

    fn disk_kernel() -> KernelSpec {
        KernelSpec::new(KernelKind::Disk, 0.2).unwrap()
    }

    #[test]
    fn jacobian_of_identity_is_one() {
        let field = DisplacementField::zeros(16, 16);
        let det = jacobian_det_field(&field);
        for &v in det.as_slice() {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn jacobian_of_affine_scale_is_exact() {
        // gamma(p) = 2p  =>  d(p) = p, det = 4 in the interior. Central
        // differences are exact on affine maps, including the one-sided
        // border stencils.
        let field = DisplacementField::from_fn(16, 16, |x, y| (x as f64, y as f64));
        let det = jacobian_det_field(&field);
        for &v in det.as_slice() {
            assert!((v - 4.0).abs() < 1e-10);
        }
    }

    #[test]
    fn jacobian_of_random_affine_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let a: [f64; 4] = [
                1.0 + rng.gen::<f64>(),
                rng.gen::<f64>() - 0.5,
                rng.gen::<f64>() - 0.5,
                1.0 + rng.gen::<f64>(),
            ];
            let field = DisplacementField::from_fn(16, 16, |x, y| {
                let (x, y) = (x as f64, y as f64);
                (a[0] * x + a[1] * y - x, a[2] * x + a[3] * y - y)
            });
            let expected = (a[0] * a[3] - a[1] * a[2]).abs();
            let det = jacobian_det_field(&field);
            for &v in det.as_slice() {
                assert!((v - expected).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn mirror_of_identity_is_identity() {
        let est = MappingEstimate::identity(16, 16);
        let m = mirror_mapping(&est, FrequencyGrid::new(16, 16));
        assert_eq!(m.field.max_norm(), 0.0);
    }

    #[test]
    fn mirror_of_constant_field_negates() {
        let mut est = MappingEstimate::identity(16, 16);
        est.field = DisplacementField::from_fn(16, 16, |_, _| (1.5, -2.0));
        let m = mirror_mapping(&est, FrequencyGrid::new(16, 16));
        for y in 0..16 {
            for x in 0..16 {
                let (dx, dy) = m.field.get(x, y);
                assert!((dx + 1.5).abs() < 1e-12);
                assert!((dy - 2.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mirror_is_involutive_on_smooth_fields() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let raw = DisplacementField::from_fn(32, 32, |_, _| {
            (rng.gen::<f64>() * 4.0 - 2.0, rng.gen::<f64>() * 4.0 - 2.0)
        });
        let field = crate::grid::gaussian_smooth_field(&raw, 3.0).unwrap();
        let mut est = MappingEstimate::identity(32, 32);
        est.field = field.clone();
        let grid = FrequencyGrid::new(32, 32);
        let twice = mirror_mapping(&mirror_mapping(&est, grid), grid);
        // Interior pixels: boundary clamping makes the outermost ring
        // approximate.
        for y in 2..30 {
            for x in 2..30 {
                let (ax, ay) = field.get(x, y);
                let (bx, by) = twice.field.get(x, y);
                assert!((ax - bx).abs() < 1e-6 && (ay - by).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn dc_filter_with_identity_mapping_is_rasterized_kernel() {
        let grid = grid64();
        let kernel = disk_kernel();
        let identity = AffineMapping::identity(grid);
        let filter = build_filter(grid, &kernel, &identity, false, true);
        let (cx, cy) = grid.center();
        let scale = 0.5 / r_target(grid);
        for y in 0..64 {
            for x in 0..64 {
                let xi = (
                    (x as f64 - cx as f64) * scale,
                    (y as f64 - cy as f64) * scale,
                );
                assert!((filter.get(x, y) - kernel.eval(xi)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn translation_filter_is_two_shifted_kernels() {
        let grid = grid64();
        let kernel = disk_kernel();
        let shift = (9.0, 0.0);
        let mapping = AffineMapping::translation(grid, shift);
        let filter = build_filter(grid, &kernel, &mapping, false, false);
        let (cx, cy) = grid.center();
        let scale = 0.5 / r_target(grid);
        for y in 0..64 {
            for x in 0..64 {
                let eval = |sx: f64| {
                    kernel.eval((
                        (x as f64 + sx - cx as f64) * scale,
                        (y as f64 - cy as f64) * scale,
                    ))
                };
                let expected = eval(shift.0) + eval(-shift.0);
                assert!(
                    (filter.get(x, y) - expected).abs() < 1e-9,
                    "at ({x},{y}): {} vs {expected}",
                    filter.get(x, y)
                );
            }
        }
    }

    #[test]
    fn normalized_translation_scales_by_inv_sqrt_two() {
        let grid = grid64();
        let kernel = disk_kernel();
        let mapping = AffineMapping::translation(grid, (9.0, 0.0));
        let plain = build_filter(grid, &kernel, &mapping, false, false);
        let norm = build_filter(grid, &kernel, &mapping, true, false);
        for (a, b) in plain.as_slice().iter().zip(norm.as_slice()) {
            assert!((b - a * std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        }
    }

    #[test]
    fn filters_are_mirror_symmetric() {
        let grid = grid64();
        let kernel = disk_kernel();
        let mapping = AffineMapping::new(grid, [0.8, 0.1, -0.2, 1.1], (7.0, 3.0));
        let filter = build_filter(grid, &kernel, &mapping, true, false);
        for y in 0..64 {
            for x in 0..64 {
                let (mx, my) = grid.mirror(x, y);
                assert_eq!(filter.get(x, y), filter.get(mx, my));
            }
        }
    }

    #[test]
    fn single_allpass_bank_reconstructs_exactly() {
        let grid = FrequencyGrid::new(32, 32);
        let kernel = disk_kernel();
        let ones = Image::constant(32, 32, 1.0);
        let bank = FilterBank::from_filters(grid, kernel, false, vec![(0, ones)]).unwrap();
        assert!(bank.diagnostics.reconstruction_safe);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let img = Image::from_fn(32, 32, |_, _| rng.gen::<f64>());
        let coeffs = forward(&img, &bank).unwrap();
        // All-pass filter: the single band is the image itself.
        let band = coeffs.band(0).unwrap();
        for (a, b) in band.as_slice().iter().zip(img.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
        let rec = inverse(&coeffs, &bank).unwrap();
        for (a, b) in rec.as_slice().iter().zip(img.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn forward_is_linear() {
        let grid = FrequencyGrid::new(32, 32);
        let bank = analytic::annulus_bank(grid, disk_kernel(), 3, false).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let f = Image::from_fn(32, 32, |_, _| rng.gen::<f64>());
        let g = Image::from_fn(32, 32, |_, _| rng.gen::<f64>());
        let (a, b) = (1.7, -0.4);
        let combo = Image::from_fn(32, 32, |x, y| a * f.get(x, y) + b * g.get(x, y));
        let cf = forward(&f, &bank).unwrap();
        let cg = forward(&g, &bank).unwrap();
        let cc = forward(&combo, &bank).unwrap();
        for ((n, band), ((_, bf), (_, bg))) in
            cc.bands.iter().zip(cf.bands.iter().zip(cg.bands.iter()))
        {
            for (i, v) in band.as_slice().iter().enumerate() {
                let expected = a * bf.as_slice()[i] + b * bg.as_slice()[i];
                assert!((v - expected).abs() < 1e-12, "band {n}");
            }
        }
    }

    #[test]
    fn parseval_style_bound_holds() {
        let grid = FrequencyGrid::new(32, 32);
        let bank = analytic::annulus_bank(grid, disk_kernel(), 3, false).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let img = Image::from_fn(32, 32, |_, _| rng.gen::<f64>());
        let coeffs = forward(&img, &bank).unwrap();
        let coeff_energy: f64 = coeffs
            .bands
            .iter()
            .map(|(_, b)| b.as_slice().iter().map(|v| v * v).sum::<f64>())
            .sum();
        let img_energy: f64 = img.as_slice().iter().map(|v| v * v).sum();
        assert!(coeff_energy <= bank.diagnostics.max_coverage * img_energy + 1e-9);
    }

    #[test]
    fn zero_coefficients_give_zero_image() {
        let grid = FrequencyGrid::new(32, 32);
        let bank = analytic::annulus_bank(grid, disk_kernel(), 3, false).unwrap();
        let bands = bank
            .filters
            .iter()
            .map(|&(n, _)| (n, Image::zeros(32, 32)))
            .collect();
        let coeffs = CoefficientSet { grid, bands };
        let rec = inverse(&coeffs, &bank).unwrap();
        assert!(rec.as_slice().iter().all(|&v| v.abs() < 1e-14));
    }

    #[test]
    fn energy_ratio_is_one_for_identity_dc() {
        let grid = grid64();
        let kernel = disk_kernel();
        let identity = AffineMapping::identity(grid);
        let mappings: Vec<(i32, &dyn FrequencyMapping)> = vec![(0, &identity)];
        let bank = FilterBank::from_mappings(grid, kernel, &mappings, true).unwrap();
        let ratio = energy_ratio(0, &bank).unwrap();
        assert!((ratio - 1.0).abs() < 0.01, "ratio {ratio}");
        // With a single region covering the grid, coverage is the squared
        // base filter.
        let filter = bank.filter(0).unwrap();
        for (c, &v) in bank.coverage.as_slice().iter().zip(filter.as_slice()) {
            assert!((c - v * v).abs() < 1e-12);
        }
    }
}
