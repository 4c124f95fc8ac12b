//! Symmetric partitioning of the Fourier plane into harmonic-mode regions.

mod scale_space;
mod voronoi;
mod watershed;

pub use scale_space::{detect_modes, log_spectrum, otsu_threshold};
pub use voronoi::voronoi_partition;
pub use watershed::{watershed_partition, WATERSHED_PRESMOOTH_SIGMA};

use serde::{Deserialize, Serialize};

use crate::error::{EwtError, Result};
use crate::grid::FrequencyGrid;

/// Detected harmonic modes on the frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSet {
    pub grid: FrequencyGrid,
    /// Pixel coordinates of mode centers; the origin is always present.
    pub centers: Vec<(usize, usize)>,
    /// Scale-space persistence of each center (scales survived).
    pub persistence: Vec<f64>,
}

impl ModeSet {
    pub fn new(
        grid: FrequencyGrid,
        centers: Vec<(usize, usize)>,
        persistence: Vec<f64>,
    ) -> Result<Self> {
        if centers.len() != persistence.len() {
            return Err(EwtError::InvalidParameter(
                "centers and persistence lengths differ".into(),
            ));
        }
        let origin = grid.center();
        if !centers.contains(&origin) {
            return Err(EwtError::InvalidParameter(
                "mode set must contain the origin".into(),
            ));
        }
        for &(x, y) in &centers {
            let m = grid.mirror(x, y);
            if !centers.contains(&m) {
                return Err(EwtError::InvalidParameter(format!(
                    "mode set is not symmetric: ({x},{y}) has no mirror"
                )));
            }
        }
        Ok(Self {
            grid,
            centers,
            persistence,
        })
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }
}

/// A symmetric labeling of the frequency grid. Label 0 contains the
/// origin; other regions come in mirror pairs (n, -n) or are self-paired.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub grid: FrequencyGrid,
    /// Label per pixel, row-major.
    pub labels: Vec<i32>,
    /// The involution n <-> -n; self-mirrored regions appear as (n, n).
    pub pairs: Vec<(i32, i32)>,
    /// Center pixel per label, aligned with the label values in `pairs`.
    pub centers: Vec<(i32, (usize, usize))>,
}

/// Sidecar metadata serialized next to the label PNG.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartitionMeta {
    pub pairs: Vec<(i32, i32)>,
    pub centers: Vec<(i32, (usize, usize))>,
    pub s0: f64,
}

impl Partition {
    pub fn label_at(&self, x: usize, y: usize) -> i32 {
        self.labels[y * self.grid.width + x]
    }

    /// Mirror label of `n` under the pairs involution.
    pub fn pair_of(&self, n: i32) -> i32 {
        for &(a, b) in &self.pairs {
            if a == n {
                return b;
            }
            if b == n {
                return a;
            }
        }
        n
    }

    /// Non-negative representative labels: 0 plus one label per pair.
    pub fn positive_labels(&self) -> Vec<i32> {
        let mut out: Vec<i32> = self.pairs.iter().map(|&(a, b)| a.max(b)).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Pixels carrying exactly label `n`.
    pub fn region_pixels(&self, n: i32) -> Vec<(usize, usize)> {
        let w = self.grid.width;
        self.labels
            .iter()
            .enumerate()
            .filter(|&(_, &l)| l == n)
            .map(|(i, _)| (i % w, i / w))
            .collect()
    }

    /// Pixelwise mirror-symmetry check: labels must satisfy
    /// `label(-p) == pair(label(p))` everywhere. The (at most four)
    /// self-mirrored Nyquist pixels are exempt: there `p` and `-p`
    /// coincide, so a pair label cannot be mirrored and the positive
    /// representative is stored instead.
    pub fn is_mirror_symmetric(&self) -> bool {
        let w = self.grid.width;
        let h = self.grid.height;
        for y in 0..h {
            for x in 0..w {
                let (mx, my) = self.grid.mirror(x, y);
                if (mx, my) == (x, y) {
                    continue;
                }
                if self.labels[my * w + mx] != self.pair_of(self.labels[y * w + x]) {
                    return false;
                }
            }
        }
        true
    }
}

/// Assigns paired labels to symmetric mode centers. The origin gets 0;
/// each mirror pair gets (n, -n) with the lexicographically smaller pixel
/// on the positive side; self-mirrored centers are self-paired.
pub(crate) fn assign_labels(modes: &ModeSet) -> (Vec<(i32, (usize, usize))>, Vec<(i32, i32)>) {
    let origin = modes.grid.center();
    let mut ordered: Vec<(usize, usize)> = modes.centers.clone();
    ordered.sort_unstable_by_key(|&(x, y)| (y, x));
    let mut centers = vec![(0i32, origin)];
    let mut pairs = vec![(0i32, 0i32)];
    let mut used: Vec<(usize, usize)> = vec![origin];
    let mut next = 1i32;
    for &c in &ordered {
        if used.contains(&c) {
            continue;
        }
        let m = modes.grid.mirror(c.0, c.1);
        if m == c {
            centers.push((next, c));
            pairs.push((next, next));
            used.push(c);
        } else {
            let (pos, neg) = if c <= m { (c, m) } else { (m, c) };
            centers.push((next, pos));
            centers.push((-next, neg));
            pairs.push((next, -next));
            used.push(pos);
            used.push(neg);
        }
        next += 1;
    }
    (centers, pairs)
}

/// Enforces exact mirror symmetry on a labeling: for each pixel pair
/// (p, -p) a single representative label is chosen deterministically and
/// the mirror receives its paired label.
pub(crate) fn symmetrize_labels(
    grid: FrequencyGrid,
    labels: &mut [i32],
    pair_of: impl Fn(i32) -> i32,
) {
    let w = grid.width;
    let h = grid.height;
    for y in 0..h {
        for x in 0..w {
            let (mx, my) = grid.mirror(x, y);
            if (mx, my) == (x, y) {
                // Self-mirrored Nyquist pixel: store the positive
                // representative of whatever pair it landed in.
                let a = labels[y * w + x];
                labels[y * w + x] = a.max(pair_of(a));
                continue;
            }
            if (y, x) > (my, mx) {
                continue; // handled from the mirror side
            }
            let a = labels[y * w + x];
            let b = pair_of(labels[my * w + mx]);
            let chosen = if a == b {
                a
            } else if (a.abs(), a) < (b.abs(), b) {
                a
            } else {
                b
            };
            labels[y * w + x] = chosen;
            labels[my * w + mx] = pair_of(chosen);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_assignment_pairs_mirrors() {
        let grid = FrequencyGrid::new(64, 64);
        let centers = vec![(32, 32), (40, 32), (24, 32), (32, 44), (32, 20)];
        let modes = ModeSet::new(grid, centers, vec![1.0; 5]).unwrap();
        let (centers, pairs) = assign_labels(&modes);
        assert_eq!(centers.len(), 5);
        assert_eq!(pairs.len(), 3); // 0 plus two mirror pairs
        assert!(pairs.contains(&(1, -1)));
        assert!(pairs.contains(&(2, -2)));
        // Mirror centers carry negated labels.
        for &(n, (x, y)) in &centers {
            let (mx, my) = grid.mirror(x, y);
            let mirrored = centers.iter().find(|&&(_, c)| c == (mx, my)).unwrap();
            assert_eq!(mirrored.0, -n);
        }
    }

    #[test]
    fn modeset_rejects_asymmetric_centers() {
        let grid = FrequencyGrid::new(64, 64);
        let centers = vec![(32, 32), (40, 32)];
        assert!(ModeSet::new(grid, centers, vec![1.0; 2]).is_err());
    }
}
