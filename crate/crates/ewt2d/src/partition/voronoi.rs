//! Voronoi partitioning: nearest mode center in Euclidean pixel distance.

use super::{assign_labels, symmetrize_labels, ModeSet, Partition};
use crate::error::{EwtError, Result};

/// Labels every pixel by its nearest center (ties to the smaller label
/// index in the order 0, 1, -1, 2, -2, ...), then enforces exact mirror
/// symmetry.
pub fn voronoi_partition(modes: &ModeSet) -> Result<Partition> {
    if modes.is_empty() {
        return Err(EwtError::InvalidParameter(
            "voronoi partition needs at least one center".into(),
        ));
    }
    let grid = modes.grid;
    let (centers, pairs) = assign_labels(modes);

    // Visit centers in label order 0, 1, -1, 2, -2, ... so distance ties
    // resolve to the smaller label index.
    let mut ordered = centers.clone();
    ordered.sort_unstable_by_key(|&(n, _)| (n.abs(), -n));

    let (w, h) = (grid.width, grid.height);
    let mut labels = vec![0i32; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut best = i64::MAX;
            let mut best_label = 0i32;
            for &(n, (cx, cy)) in &ordered {
                let dx = x as i64 - cx as i64;
                let dy = y as i64 - cy as i64;
                let d2 = dx * dx + dy * dy;
                if d2 < best {
                    best = d2;
                    best_label = n;
                }
            }
            labels[y * w + x] = best_label;
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
