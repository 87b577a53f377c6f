use hlad_core::Scalar;
use serde::{Deserialize, Serialize};

use crate::Position;

pub const DETECTION_THRESHOLD: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub rows: usize,
    pub cols: usize,
    /// Meters per cell along both axes.
    pub cell_size: f64,
    /// Corner of cell (0, 0); rows run along y, columns along x.
    pub origin: Position,
    pub sigma: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { rows: 24, cols: 24, cell_size: 0.25, origin: [0.0, 0.0], sigma: 0.5 }
    }
}

impl GridConfig {
    pub fn cells(&self) -> usize {
        self.rows * self.cols
    }

    pub fn cell_center(&self, row: usize, col: usize) -> Position {
        [
            self.origin[0] + (col as f64 + 0.5) * self.cell_size,
            self.origin[1] + (row as f64 + 0.5) * self.cell_size,
        ]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Heatmap<T> {
    pub grid: GridConfig,
    /// Row-major values.
    pub values: Vec<T>,
}

impl<T: Scalar> Heatmap<T> {
    pub fn zeros(grid: GridConfig) -> Self {
        Self { grid, values: vec![T::zero(); grid.cells()] }
    }

    /// Wraps raw values; `None` if the length does not match the grid.
    pub fn from_values(grid: GridConfig, values: Vec<T>) -> Option<Self> {
        (values.len() == grid.cells()).then_some(Self { grid, values })
    }

    pub fn at(&self, row: usize, col: usize) -> T {
        self.values[row * self.grid.cols + col]
    }
}

/// Max-combined Gaussian bumps, one per source.
pub fn render_target<T: Scalar>(sources: &[Position], grid: &GridConfig) -> Heatmap<T> {
    let two_var = 2.0 * grid.sigma * grid.sigma;
    let mut values = Vec::with_capacity(grid.cells());
    for r in 0..grid.rows {
        for c in 0..grid.cols {
            let [x, y] = grid.cell_center(r, c);
            let v = sources
                .iter()
                .map(|s| (-((x - s[0]).powi(2) + (y - s[1]).powi(2)) / two_var).exp())
                .fold(0.0, f64::max);
            values.push(T::from_f64_lossy(v));
        }
    }
    Heatmap { grid: *grid, values }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Keypoint {
    pub position: Position,
    pub score: f64,
    pub row: usize,
    pub col: usize,
}

/// Local maxima of the 3x3 neighborhood at or above `threshold`.
///
/// A cell qualifies when no neighbor exceeds it and at least one neighbor is
/// strictly lower. Among equal neighboring peaks only the lowest row-major
/// index survives, so a flat plateau yields nothing and a two-cell tie yields
/// one keypoint.
pub fn extract_keypoints<T: Scalar>(heatmap: &Heatmap<T>, threshold: f64) -> Vec<Keypoint> {
    let g = &heatmap.grid;
    let (rows, cols) = (g.rows as isize, g.cols as isize);
    let mut out = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let v = heatmap.at(r as usize, c as usize).to_f64_lossy();
            if v < threshold {
                continue;
            }
            let idx = r * cols + c;
            let mut keep = true;
            let mut any_lower = false;
            for dr in -1..=1 {
                for dc in -1..=1 {
                    let (nr, nc) = (r + dr, c + dc);
                    if (dr, dc) == (0, 0) || nr < 0 || nc < 0 || nr >= rows || nc >= cols {
                        continue;
                    }
                    let n = heatmap.at(nr as usize, nc as usize).to_f64_lossy();
                    if n > v || (n == v && nr * cols + nc < idx) {
                        keep = false;
                    }
                    any_lower |= n < v;
                }
            }
            if keep && any_lower {
                out.push(Keypoint { position: g.cell_center(r as usize, c as usize), score: v, row: r as usize, col: c as usize });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn peak_and_sigma_values() {
        let g = GridConfig::default();
        let src = g.cell_center(5, 7);
        let h: Heatmap<f64> = render_target(&[src], &g);
        assert_eq!(h.at(5, 7), 1.0);
        let one_sigma: Heatmap<f64> = render_target(&[[src[0] + 0.5, src[1]]], &g);
        assert!((one_sigma.at(5, 7) - (-0.5f64).exp()).abs() < 1e-15);
        assert!((one_sigma.at(5, 7) - 0.6065).abs() < 1e-4);
    }

    #[test]
    fn degenerate_maps() {
        let g = GridConfig::default();
        assert!(extract_keypoints(&Heatmap::<f64>::zeros(g), DETECTION_THRESHOLD).is_empty());
        let flat = Heatmap::from_values(g, vec![0.6f64; g.cells()]).unwrap();
        assert!(extract_keypoints(&flat, DETECTION_THRESHOLD).is_empty());
        assert!(Heatmap::from_values(g, vec![0.0f32; 3]).is_none());
    }

    #[test]
    fn two_cell_tie_goes_to_lower_index() {
        let g = GridConfig::default();
        let mut h = Heatmap::<f64>::zeros(g);
        h.values[3 * 24 + 4] = 0.9;
        h.values[3 * 24 + 5] = 0.9;
        let k = extract_keypoints(&h, 0.5);
        assert_eq!(k.len(), 1);
        assert_eq!((k[0].row, k[0].col), (3, 4));
    }

    #[test]
    fn below_threshold_is_ignored() {
        let g = GridConfig::default();
        let mut h = Heatmap::<f32>::zeros(g);
        h.values[50] = 0.49;
        assert!(extract_keypoints(&h, 0.5).is_empty());
        h.values[50] = 0.5;
        assert_eq!(extract_keypoints(&h, 0.5).len(), 1);
    }
}
