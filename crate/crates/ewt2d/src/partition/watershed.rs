//! Marker-controlled watershed by immersion with a priority queue.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{assign_labels, symmetrize_labels, ModeSet, Partition};
use crate::error::{EwtError, Result};
use crate::grid::{gaussian_smooth_image, Image};

/// Pre-smoothing applied to the log-spectrum before flooding; raw spectra
/// are too spiky for clean basins.
pub const WATERSHED_PRESMOOTH_SIGMA: f64 = 2.0;

struct QueueEntry {
    value: f64,
    order: u64,
    x: usize,
    y: usize,
    label: i32,
}

impl PartialEq for QueueEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for QueueEntry {}
impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for QueueEntry {
    // BinaryHeap is a max-heap; invert so the smallest value (then the
    // earliest insertion) floods first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .value
            .total_cmp(&self.value)
            .then_with(|| other.order.cmp(&self.order))
    }
}

/// Floods `-smooth(logspec)` from the mode centers; 4-connected regions,
/// plateau ties broken by insertion order. The result is symmetrized
/// exactly as in the Voronoi method.
pub fn watershed_partition(logspec: &Image, modes: &ModeSet) -> Result<Partition> {
    watershed_partition_with_sigma(logspec, modes, WATERSHED_PRESMOOTH_SIGMA)
}

pub fn watershed_partition_with_sigma(
    logspec: &Image,
    modes: &ModeSet,
    presmooth_sigma: f64,
) -> Result<Partition> {
    if modes.is_empty() {
        return Err(EwtError::InvalidParameter(
            "watershed partition needs at least one marker".into(),
        ));
    }
    let grid = modes.grid;
    if logspec.width() != grid.width || logspec.height() != grid.height {
        return Err(EwtError::DimensionMismatch {
            expected_w: grid.width,
            expected_h: grid.height,
            got_w: logspec.width(),
            got_h: logspec.height(),
        });
    }
    let landscape = gaussian_smooth_image(logspec, presmooth_sigma)?.map(|v| -v);
    let (centers, pairs) = assign_labels(modes);

    let (w, h) = (grid.width, grid.height);
    let mut labels = vec![i32::MIN; w * h];
    let mut heap = BinaryHeap::new();
    let mut order = 0u64;

    // Seed markers in label order for deterministic plateau handling.
    let mut ordered = centers.clone();
    ordered.sort_unstable_by_key(|&(n, _)| (n.abs(), -n));
    for &(n, (cx, cy)) in &ordered {
        heap.push(QueueEntry {
            value: landscape.get(cx, cy),
            order,
            x: cx,
            y: cy,
            label: n,
        });
        order += 1;
    }

    while let Some(entry) = heap.pop() {
        let idx = entry.y * w + entry.x;
        if labels[idx] != i32::MIN {
            continue;
        }
        labels[idx] = entry.label;
        const NB: [(i32, i32); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];
        for (dx, dy) in NB {
            let nx = entry.x as i32 + dx;
            let ny = entry.y as i32 + dy;
            if nx < 0 || ny < 0 || nx >= w as i32 || ny >= h as i32 {
                continue;
            }
            let (nx, ny) = (nx as usize, ny as usize);
            if labels[ny * w + nx] == i32::MIN {
                heap.push(QueueEntry {
                    // Flood in increasing value order, never below the
                    // level already reached.
                    value: landscape.get(nx, ny).max(entry.value),
                    order,
                    x: nx,
                    y: ny,
                    label: entry.label,
                });
                order += 1;
            }
        }
    }

    let pair_lookup = pairs.clone();
    symmetrize_labels(grid, &mut labels, move |n| {
        for &(a, b) in &pair_lookup {
            if a == n {
                return b;
            }
            if b == n {
                return a;
            }
        }
        n
    });

    Ok(Partition {
        grid,
        labels,
        pairs,
        centers,
    })
}
