//! Harmonic-mode detection by scale-space persistence of spectrum maxima.

use super::ModeSet;
use crate::error::{EwtError, Result};
use crate::grid::{dft2_forward, gaussian_smooth_image, FrequencyGrid, Image};

/// Maximum number of scale-space steps tracked before a surviving maximum
/// is considered fully persistent.
const MAX_SCALES: usize = 50;

/// log(1 + |f^|) on the center-origin grid, rescaled to [0, 1].
pub fn log_spectrum(img: &Image) -> Result<Image> {
    let spec = dft2_forward(img)?;
    Ok(spec.magnitude().map(|m| (1.0 + m).ln()).rescale_unit())
}

/// Strict 8-neighborhood local maxima; border pixels compare against the
/// neighbors that exist.
fn local_maxima(img: &Image) -> Vec<(usize, usize)> {
    let (w, h) = (img.width(), img.height());
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let v = img.get(x, y);
            let mut strict = true;
            'nb: for dy in -1i32..=1 {
                for dx in -1i32..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let nx = x as i32 + dx;
                    let ny = y as i32 + dy;
                    if nx < 0 || ny < 0 || nx >= w as i32 || ny >= h as i32 {
                        continue;
                    }
                    if img.get(nx as usize, ny as usize) >= v {
                        strict = false;
                        break 'nb;
                    }
                }
            }
            if strict {
                out.push((x, y));
            }
        }
    }
    out
}

/// Two-class Otsu threshold over integer-valued samples; returns the
/// threshold t maximizing between-class variance (classes <= t and > t).
/// Degenerate inputs (all equal) return `min - 1` so everything is kept.
pub fn otsu_threshold(values: &[usize]) -> isize {
    if values.is_empty() {
        return -1;
    }
    let max = *values.iter().max().unwrap();
    let min = *values.iter().min().unwrap();
    if max == min {
        return min as isize - 1;
    }
    let mut hist = vec![0usize; max + 1];
    for &v in values {
        hist[v] += 1;
    }
    let total = values.len() as f64;
    let total_sum: f64 = values.iter().map(|&v| v as f64).sum();
    let mut best_t = min as isize;
    let mut best_var = f64::NEG_INFINITY;
    let mut w0 = 0.0;
    let mut sum0 = 0.0;
    for t in min..max {
        w0 += hist[t] as f64;
        sum0 += (t * hist[t]) as f64;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let m0 = sum0 / w0;
        let m1 = (total_sum - sum0) / w1;
        let var = w0 * w1 * (m0 - m1) * (m0 - m1);
        if var > best_var {
            best_var = var;
            best_t = t as isize;
        }
    }
    best_t
}

/// Detects harmonic modes in a log-spectrum by Gaussian scale-space
/// persistence: a scale-0 strict maximum survives a step if a maximum of
/// the further-smoothed spectrum lies within 1 px of its tracked position.
/// Modes whose persistence exceeds the Otsu threshold of the persistence
/// histogram are kept, symmetrized, and the origin is always added.
pub fn detect_modes(logspec: &Image, s0: f64) -> Result<ModeSet> {
    if !(s0 > 0.0) {
        return Err(EwtError::InvalidParameter(format!(
            "scale-space step s0 must be positive, got {s0}"
        )));
    }
    let grid = FrequencyGrid::new(logspec.width(), logspec.height());
    let origin = grid.center();

    let seeds = local_maxima(logspec);
    if seeds.is_empty() {
        return ModeSet::new(grid, vec![origin], vec![0.0]);
    }

    // Track each seed through cumulatively smoothed scales; the variance
    // grows by s0 per step.
    let step_sigma = s0.sqrt();
    let mut positions: Vec<Option<(usize, usize)>> = seeds.iter().map(|&p| Some(p)).collect();
    let mut persistence = vec![0usize; seeds.len()];
    let mut current = logspec.clone();
    for _ in 0..MAX_SCALES {
        if positions.iter().all(Option::is_none) {
            break;
        }
        current = gaussian_smooth_image(&current, step_sigma)?;
        let maxima = local_maxima(&current);
        for (i, pos) in positions.iter_mut().enumerate() {
            let Some((px, py)) = *pos else { continue };
            // Nearest maximum within 1 px (Chebyshev), ties lexicographic.
            let mut best: Option<(usize, usize, i64)> = None;
            for &(mx, my) in &maxima {
                let dx = mx as i64 - px as i64;
                let dy = my as i64 - py as i64;
                if dx.abs() <= 1 && dy.abs() <= 1 {
                    let d2 = dx * dx + dy * dy;
                    let better = match best {
                        None => true,
                        Some((bx, by, bd)) => d2 < bd || (d2 == bd && (my, mx) < (by, bx)),
                    };
                    if better {
                        best = Some((mx, my, d2));
                    }
                }
            }
            match best {
                Some((mx, my, _)) => {
                    *pos = Some((mx, my));
                    persistence[i] += 1;
                }
                None => *pos = None,
            }
        }
    }

    let threshold = otsu_threshold(&persistence);
    let mut kept: Vec<(usize, usize)> = seeds
        .iter()
        .zip(&persistence)
        .filter(|&(_, &p)| p as isize > threshold)
        .map(|(&c, _)| c)
        .collect();
    let kept_persistence: std::collections::HashMap<(usize, usize), usize> = seeds
        .iter()
        .zip(&persistence)
        .map(|(&c, &p)| (c, p))
        .collect();

    // Symmetrize: keep only centers whose mirror was also kept, add origin.
    kept.sort_unstable_by_key(|&(x, y)| (y, x));
    kept.dedup();
    let mut centers: Vec<(usize, usize)> = kept
        .iter()
        .copied()
        .filter(|&(x, y)| kept.contains(&grid.mirror(x, y)))
        .collect();
    if !centers.contains(&origin) {
        centers.push(origin);
    }
    centers.sort_unstable_by_key(|&(x, y)| (y, x));
    let pers: Vec<f64> = centers
        .iter()
        .map(|c| kept_persistence.get(c).copied().unwrap_or(0) as f64)
        .collect();
    ModeSet::new(grid, centers, pers)
}
