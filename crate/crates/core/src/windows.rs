//! Windowed sums over masked grids via summed-area tables.
//!
//! Normal estimation and the normal-deviation map both need per-pixel sums of
//! several quantities over an odd square window, restricted to valid pixels.
//! A summed-area table answers each window query in constant time.

use crate::grid::Grid;

/// Summed-area table over `value * mask`. Table is `(w+1) x (h+1)` with a
/// zero top row and left column.
pub struct IntegralTable {
    width: usize,
    height: usize,
    table: Vec<f64>,
}

impl IntegralTable {
    pub fn new(values: &Grid<f64>, mask: &Grid<bool>) -> Self {
        Self::build(values.width(), values.height(), |u, v| {
            if *mask.at(u, v) {
                *values.at(u, v)
            } else {
                0.0
            }
        })
    }

    /// Counts valid pixels instead of summing values.
    pub fn counts(mask: &Grid<bool>) -> Self {
        Self::build(mask.width(), mask.height(), |u, v| {
            if *mask.at(u, v) {
                1.0
            } else {
                0.0
            }
        })
    }

    pub fn build(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let tw = width + 1;
        let mut table = vec![0.0; tw * (height + 1)];
        for v in 0..height {
            let mut row_sum = 0.0;
            for u in 0..width {
                row_sum += f(u, v);
                table[(v + 1) * tw + (u + 1)] = table[v * tw + (u + 1)] + row_sum;
            }
        }
        Self {
            width,
            height,
            table,
        }
    }

    /// Sum over the window of odd side `window` centered at `(u, v)`,
    /// clipped to the grid.
    #[inline]
    pub fn window_sum(&self, u: usize, v: usize, window: usize) -> f64 {
        let r = window / 2;
        let u0 = u.saturating_sub(r);
        let v0 = v.saturating_sub(r);
        let u1 = (u + r + 1).min(self.width);
        let v1 = (v + r + 1).min(self.height);
        let tw = self.width + 1;
        self.table[v1 * tw + u1] + self.table[v0 * tw + u0]
            - self.table[v0 * tw + u1]
            - self.table[v1 * tw + u0]
    }
}

/// Per-pixel window sums of a set of planes sharing one validity mask.
pub struct WindowedSums {
    tables: Vec<IntegralTable>,
    counts: IntegralTable,
}

impl WindowedSums {
    pub fn new(planes: &[&Grid<f64>], mask: &Grid<bool>) -> Self {
        Self {
            tables: planes.iter().map(|p| IntegralTable::new(p, mask)).collect(),
            counts: IntegralTable::counts(mask),
        }
    }

    #[inline]
    pub fn count(&self, u: usize, v: usize, window: usize) -> f64 {
        self.counts.window_sum(u, v, window)
    }

    #[inline]
    pub fn sum(&self, plane: usize, u: usize, v: usize, window: usize) -> f64 {
        self.tables[plane].window_sum(u, v, window)
    }
}
