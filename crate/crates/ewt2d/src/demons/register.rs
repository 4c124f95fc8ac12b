//! Demons force, field exponential, single- and multi-resolution loops.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{init_affine, kernel_indicator, region_indicator, DemonsParams, MappingEstimate, Variant};
use crate::error::{EwtError, Result};
use crate::grid::{
    downsample_field, downsample_image, gaussian_smooth_field, upsample_field, warp,
    DisplacementField, Image,
};
use crate::kernels::KernelKind;
use crate::partition::Partition;

const FORCE_DENOM_FLOOR: f64 = 1e-12;

fn check_dims(fixed: &Image, moving: &Image) -> Result<()> {
    if !fixed.same_dims(moving) {
        return Err(EwtError::DimensionMismatch {
            expected_w: fixed.width(),
            expected_h: fixed.height(),
            got_w: moving.width(),
            got_h: moving.height(),
        });
    }
    Ok(())
}

/// Sum-of-squares data term `||fixed - moving o gamma||^2`.
pub(crate) fn data_energy(fixed: &Image, moving: &Image, field: &DisplacementField) -> Result<f64> {
    let warped = warp(moving, field)?;
    Ok(fixed
        .as_slice()
        .iter()
        .zip(warped.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum())
}

/// One demons force evaluation: per pixel,
/// `u = D g / (||g||^2 + (sigma_i^2 / sigma_x^2) D^2)` with
/// `D = fixed - moving o gamma` and `g` the central-difference gradient of
/// the warped moving image; zero where the denominator underflows.
pub fn demons_force(
    fixed: &Image,
    moving: &Image,
    field: &DisplacementField,
    params: &DemonsParams,
) -> Result<DisplacementField> {
    check_dims(fixed, moving)?;
    let warped = warp(moving, field)?;
    let (w, h) = (fixed.width(), fixed.height());
    let ratio = (params.sigma_i * params.sigma_i) / (params.sigma_x * params.sigma_x);
    Ok(DisplacementField::from_fn(w, h, |x, y| {
        let d = fixed.get(x, y) - warped.get(x, y);
        let xm = x.saturating_sub(1);
        let xp = (x + 1).min(w - 1);
        let ym = y.saturating_sub(1);
        let yp = (y + 1).min(h - 1);
        let gx = (warped.get(xp, y) - warped.get(xm, y)) / 2.0;
        let gy = (warped.get(x, yp) - warped.get(x, ym)) / 2.0;
        let denom = gx * gx + gy * gy + ratio * d * d;
        if denom < FORCE_DENOM_FLOOR {
            (0.0, 0.0)
        } else {
            (d * gx / denom, d * gy / denom)
        }
    }))
}

/// Composition of displacement fields: `(id + a) o (id + b)` as a field,
/// `c(p) = b(p) + a(p + b(p))` with bilinear (edge-clamped) sampling.
pub(crate) fn compose_fields(a: &DisplacementField, b: &DisplacementField) -> DisplacementField {
    DisplacementField::from_fn(a.width(), a.height(), |x, y| {
        let (bx, by) = b.get(x, y);
        let (ax, ay) = a.sample_clamped(x as f64 + bx, y as f64 + by);
        (bx + ax, by + ay)
    })
}

/// Exponential of a velocity field by scaling and squaring: halve until
/// the largest step is at most 0.5 px, then square by self-composition.
pub fn exp_field(u: &DisplacementField) -> DisplacementField {
    let max = u.max_norm();
    let mut m = 0u32;
    while max / f64::from(1u32 << m) > 0.5 {
        m += 1;
        if m >= 60 {
            break;
        }
    }
    let mut v = u.scaled(1.0 / f64::from(1u32 << m));
    for _ in 0..m {
        v = compose_fields(&v, &v);
    }
    v
}

/// Single-resolution demons loop (Vercauteren's scheme). The effective
/// variant behavior:
/// * `additive`: fluid smoothing of the update, additive composition;
/// * `diffeomorphic`: fluid smoothing, composition with `exp(u)`;
/// * `thirion`: no fluid smoothing, `sigma_i` pinned to 1, additive.
pub fn demons_register(
    fixed: &Image,
    moving: &Image,
    params: &DemonsParams,
    init: &DisplacementField,
    max_iterations: usize,
) -> Result<MappingEstimate> {
    check_dims(fixed, moving)?;
    params.validate()?;
    if init.width() != fixed.width() || init.height() != fixed.height() {
        return Err(EwtError::DimensionMismatch {
            expected_w: fixed.width(),
            expected_h: fixed.height(),
            got_w: init.width(),
            got_h: init.height(),
        });
    }
    let mut local = *params;
    if params.variant == Variant::Thirion {
        local.sigma_i = 1.0;
    }

    let n_pixels = (fixed.width() * fixed.height()) as f64;
    let e0 = data_energy(fixed, moving, init)?;
    if e0 == 0.0 {
        return Ok(MappingEstimate {
            field: init.clone(),
            init_affine: super::AffineInit::identity(),
            final_energy: 0.0,
            iterations: 0,
            rmse: 0.0,
        });
    }

    let mut field = init.clone();
    let mut energies = vec![e0];
    let mut iterations = 0usize;
    for k in 1..=max_iterations {
        let mut u = demons_force(fixed, moving, &field, &local)?;
        if local.variant != Variant::Thirion {
            u = gaussian_smooth_field(&u, local.sigma_f)?;
        }
        let c = match local.variant {
            Variant::Additive | Variant::Thirion => field.add(&u),
            Variant::Diffeomorphic => compose_fields(&field, &exp_field(&u)),
        };
        field = gaussian_smooth_field(&c, local.sigma_d)?;
        let e = data_energy(fixed, moving, &field)?;
        energies.push(e);
        iterations = k;
        if k >= 5 {
            let prev = energies[k - 5];
            if (e - prev).abs() / e0 <= local.epsilon {
                break;
            }
        }
    }

    let final_energy = *energies.last().unwrap();
    Ok(MappingEstimate {
        field,
        init_affine: super::AffineInit::identity(),
        final_energy,
        iterations,
        rmse: (final_energy / n_pixels).sqrt(),
    })
}

/// Per-level iteration cap for the Thirion variant: more iterations at
/// coarse levels, floored at 2^4.
fn thirion_cap(level: usize) -> usize {
    1usize << (level + 1).max(4)
}

/// Coarse-to-fine registration. Levels whose downsampled size would fall
/// below the minimum are skipped; a full-resolution pass always runs.
pub fn multires_register(
    fixed: &Image,
    moving: &Image,
    params: &DemonsParams,
    init: &DisplacementField,
) -> Result<MappingEstimate> {
    check_dims(fixed, moving)?;
    params.validate()?;
    let (w, h) = (fixed.width(), fixed.height());
    let min_dim = w.min(h);

    let mut field = init.clone();
    let mut total_iterations = 0usize;
    for k in (1..=params.n_level).rev() {
        let factor = 1usize << k;
        if min_dim / factor < crate::grid::MIN_DIM {
            continue;
        }
        let f_k = downsample_image(fixed, factor)?;
        let m_k = downsample_image(moving, factor)?;
        let d_k = downsample_field(&field.scaled(1.0 / factor as f64), factor)?;
        let cap = match params.variant {
            Variant::Thirion => thirion_cap(k).min(params.max_iterations),
            _ => params.max_iterations,
        };
        let est = demons_register(&f_k, &m_k, params, &d_k, cap)?;
        total_iterations += est.iterations;
        field = upsample_field(&est.field.scaled(factor as f64), w, h);
    }
    // Full-resolution pass.
    let cap = match params.variant {
        Variant::Thirion => thirion_cap(0).min(params.max_iterations),
        _ => params.max_iterations,
    };
    let mut est = demons_register(fixed, moving, params, &field, cap)?;
    est.iterations += total_iterations;
    Ok(est)
}

/// Largest integer n with 2^n strictly smaller than both dimensions.
pub(crate) fn max_pyramid_exponent(w: usize, h: usize) -> usize {
    let mut n = 0usize;
    while (1usize << (n + 1)) < w.min(h) {
        n += 1;
    }
    n
}

/// Grid search over (sigma_d, n_level) minimizing the final data energy;
/// ties prefer the smaller sigma_d, then the smaller level count.
pub fn select_params(
    fixed: &Image,
    moving: &Image,
    template: &DemonsParams,
    init: &DisplacementField,
) -> Result<DemonsParams> {
    let n_p = max_pyramid_exponent(fixed.width(), fixed.height());
    let levels = [n_p.saturating_sub(1).max(1), n_p.max(1)];
    let sigmas: Vec<f64> = (0..=20).map(|i| 0.30 + 0.01 * i as f64).collect();

    let mut candidates = Vec::new();
    for &n_level in &levels {
        for &sigma_d in &sigmas {
            candidates.push((sigma_d, n_level));
        }
    }
    candidates.dedup();

    let results: Vec<(f64, f64, usize)> = candidates
        .par_iter()
        .map(|&(sigma_d, n_level)| {
            let mut p = *template;
            p.sigma_d = sigma_d;
            p.n_level = n_level;
            let est = multires_register(fixed, moving, &p, init)?;
            Ok((est.final_energy, sigma_d, n_level))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut best = results[0];
    for &cand in &results[1..] {
        let (e, s, l) = cand;
        let (be, bs, bl) = best;
        if e < be || (e == be && (s < bs || (s == bs && l < bl))) {
            best = cand;
        }
    }
    let mut out = *template;
    out.sigma_d = best.1;
    out.n_level = best.2;
    Ok(out)
}

/// Per-region registration record written next to the field files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegionRecord {
    pub n: i32,
    pub variant: Variant,
    pub sigma_d: f64,
    pub n_level: usize,
    pub iterations: usize,
    pub final_energy: f64,
    pub rmse: f64,
}

/// Registers every non-negative region of a partition onto the kernel
/// support. Regions run in a parallel pool; results are ordered by label
/// and independent of the pool size.
pub fn register_partition(
    partition: &Partition,
    kind: KernelKind,
    params: &DemonsParams,
    auto_select: bool,
) -> Result<Vec<(i32, MappingEstimate, RegionRecord)>> {
    let grid = partition.grid;
    let moving = kernel_indicator(kind, grid)?;
    let labels = partition.positive_labels();
    labels
        .par_iter()
        .map(|&n| {
            let fixed = region_indicator(partition, n)?;
            let pixels = partition.region_pixels(n);
            let (init, affine) = init_affine(&pixels, kind, grid)?;
            let p = if auto_select {
                select_params(&fixed, &moving, params, &init)?
            } else {
                *params
            };
            let mut est = multires_register(&fixed, &moving, &p, &init)?;
            est.init_affine = affine;
            let record = RegionRecord {
                n,
                variant: p.variant,
                sigma_d: p.sigma_d,
                n_level: p.n_level,
                iterations: est.iterations,
                final_energy: est.final_energy,
                rmse: est.rmse,
            };
            Ok((n, est, record))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::FrequencyGrid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn disk_image(w: usize, h: usize, cx: f64, cy: f64, r: f64) -> Image {
        let raw = Image::from_fn(w, h, |x, y| {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            if dx * dx + dy * dy <= r * r {
                1.0
            } else {
                0.0
            }
        });
        crate::grid::gaussian_smooth_image(&raw, 1.0).unwrap()
    }

    #[test]
    fn force_is_zero_when_matched() {
        let img = disk_image(32, 32, 16.0, 16.0, 8.0);
        let field = DisplacementField::zeros(32, 32);
        let u = demons_force(&img, &img, &field, &DemonsParams::default()).unwrap();
        assert_eq!(u.max_norm(), 0.0);
    }

    #[test]
    fn force_is_zero_without_gradient() {
        // Constant moving image: D != 0 but g = 0 everywhere.
        let fixed = Image::constant(16, 16, 1.0);
        let moving = Image::constant(16, 16, 0.0);
        let field = DisplacementField::zeros(16, 16);
        let u = demons_force(&fixed, &moving, &field, &DemonsParams::default()).unwrap();
        assert_eq!(u.max_norm(), 0.0);
    }

    #[test]
    fn force_matches_hand_evaluated_formula() {
        // Construct D = 1 and g = (1, 0) at one pixel: moving is a ramp of
        // slope 1, fixed = warped moving + 1 at the probe pixel.
        let moving = Image::from_fn(16, 16, |x, _| x as f64);
        let mut fixed = moving.clone();
        fixed.set(8, 8, moving.get(8, 8) + 1.0);
        let field = DisplacementField::zeros(16, 16);
        let params = DemonsParams {
            sigma_x: 5.0,
            sigma_i: 1.0,
            ..Default::default()
        };
        let u = demons_force(&fixed, &moving, &field, &params).unwrap();
        let (ux, uy) = u.get(8, 8);
        assert!((ux - 25.0 / 26.0).abs() < 1e-12, "ux = {ux}");
        assert!(uy.abs() < 1e-12);
    }

    #[test]
    fn force_step_bound_holds_on_random_fields() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let params = DemonsParams::default();
        let bound = params.sigma_x / (2.0 * params.sigma_i) + 1e-9;
        for _ in 0..20 {
            let fixed = Image::from_fn(24, 24, |_, _| rng.gen::<f64>());
            let moving = Image::from_fn(24, 24, |_, _| rng.gen::<f64>());
            let field = DisplacementField::from_fn(24, 24, |_, _| {
                (rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0)
            });
            let u = demons_force(&fixed, &moving, &field, &params).unwrap();
            assert!(u.max_norm() <= bound, "step {} > {bound}", u.max_norm());
        }
    }

    #[test]
    fn exp_field_of_zero_and_constant() {
        let zero = DisplacementField::zeros(16, 16);
        assert_eq!(exp_field(&zero).max_norm(), 0.0);
        // Constant fields are translations: exp is exact.
        let c = DisplacementField::from_fn(16, 16, |_, _| (0.75, -1.25));
        let e = exp_field(&c);
        for y in 2..14 {
            for x in 2..14 {
                let (dx, dy) = e.get(x, y);
                assert!((dx - 0.75).abs() < 1e-12);
                assert!((dy + 1.25).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn exp_field_approaches_identity_for_small_fields() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let raw = DisplacementField::from_fn(32, 32, |_, _| {
            (rng.gen::<f64>() * 0.2 - 0.1, rng.gen::<f64>() * 0.2 - 0.1)
        });
        let u = gaussian_smooth_field(&raw, 2.0).unwrap();
        assert!(u.max_norm() <= 0.1);
        let e = exp_field(&u);
        let mut err = 0.0f64;
        for y in 0..32 {
            for x in 0..32 {
                let (ax, ay) = u.get(x, y);
                let (bx, by) = e.get(x, y);
                err = err.max((ax - bx).abs().max((ay - by).abs()));
            }
        }
        assert!(err <= 1e-3, "exp deviation {err}");
    }

    #[test]
    fn exp_field_yields_positive_jacobian() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let raw = DisplacementField::from_fn(32, 32, |_, _| {
            (rng.gen::<f64>() * 6.0 - 3.0, rng.gen::<f64>() * 6.0 - 3.0)
        });
        let mut u = gaussian_smooth_field(&raw, 3.0).unwrap();
        let scale = 2.0 / u.max_norm();
        u = u.scaled(scale);
        let e = exp_field(&u);
        for y in 1..31usize {
            for x in 1..31usize {
                let right = e.get(x + 1, y);
                let left = e.get(x - 1, y);
                let down = e.get(x, y + 1);
                let up = e.get(x, y - 1);
                let j11 = 1.0 + (right.0 - left.0) / 2.0;
                let j12 = (down.0 - up.0) / 2.0;
                let j21 = (right.1 - left.1) / 2.0;
                let j22 = 1.0 + (down.1 - up.1) / 2.0;
                let det = j11 * j22 - j12 * j21;
                assert!(det > 0.0, "negative jacobian {det} at ({x},{y})");
            }
        }
    }

    #[test]
    fn register_identical_pair_returns_init() {
        let img = disk_image(32, 32, 16.0, 16.0, 8.0);
        let zero = DisplacementField::zeros(32, 32);
        let est = demons_register(&img, &img, &DemonsParams::default(), &zero, 100).unwrap();
        assert_eq!(est.iterations, 0);
        assert_eq!(est.rmse, 0.0);
        assert_eq!(est.field, zero);
    }

    #[test]
    fn register_zero_iterations_returns_init() {
        let fixed = disk_image(32, 32, 16.0, 16.0, 8.0);
        let moving = disk_image(32, 32, 19.0, 16.0, 8.0);
        let zero = DisplacementField::zeros(32, 32);
        let est = demons_register(&fixed, &moving, &DemonsParams::default(), &zero, 0).unwrap();
        assert_eq!(est.iterations, 0);
        assert_eq!(est.field, zero);
    }

    #[test]
    fn register_small_translation_converges() {
        let fixed = disk_image(64, 64, 32.0, 32.0, 12.0);
        let moving = disk_image(64, 64, 35.0, 32.0, 12.0);
        let zero = DisplacementField::zeros(64, 64);
        let params = DemonsParams::default();
        let est = demons_register(&fixed, &moving, &params, &zero, 500).unwrap();
        assert!(est.rmse < 0.02, "rmse {}", est.rmse);
    }

    #[test]
    fn multires_handles_large_translation() {
        let fixed = disk_image(128, 128, 64.0, 64.0, 24.0);
        let moving = disk_image(128, 128, 84.0, 64.0, 24.0);
        let zero = DisplacementField::zeros(128, 128);
        let params = DemonsParams {
            n_level: 3,
            ..Default::default()
        };
        let est = multires_register(&fixed, &moving, &params, &zero).unwrap();
        assert!(est.rmse < 0.05, "rmse {}", est.rmse);
        // Constant-field pyramid scaling rule: a field scaled down by 2^k
        // and back up returns the constant.
        let c = DisplacementField::from_fn(128, 128, |_, _| (3.0, -1.0));
        let down = downsample_field(&c.scaled(1.0 / 4.0), 4).unwrap();
        let up = upsample_field(&down.scaled(4.0), 128, 128);
        let (dx, dy) = up.get(64, 64);
        assert!((dx - 3.0).abs() < 1e-9 && (dy + 1.0).abs() < 1e-9);
    }

    #[test]
    fn pyramid_exponent_matches_contract() {
        assert_eq!(max_pyramid_exponent(256, 256), 7);
        assert_eq!(max_pyramid_exponent(64, 64), 5);
        assert_eq!(max_pyramid_exponent(300, 256), 7);
    }

    #[test]
    fn select_params_tie_rule() {
        // Identical pair: every candidate reaches zero energy immediately,
        // so the tie rule picks the smallest sigma_d and level count.
        let grid = FrequencyGrid::new(64, 64);
        let _ = grid;
        let img = disk_image(64, 64, 32.0, 32.0, 10.0);
        let zero = DisplacementField::zeros(64, 64);
        let template = DemonsParams::default();
        let chosen = select_params(&img, &img, &template, &zero).unwrap();
        assert!((chosen.sigma_d - 0.30).abs() < 1e-12);
        assert_eq!(chosen.n_level, 4); // n_P = 5 for 64 px, tie -> n_P - 1
    }
}
