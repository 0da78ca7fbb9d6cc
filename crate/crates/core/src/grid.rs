//! Row-major 2-D grids used for all per-pixel data in the pipeline.

use crate::error::{Error, Result};

/// Dense row-major grid. `(u, v)` addresses column `u` of row `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Clone> Grid<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::InvalidValue(format!(
                "grid data length {} does not match {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Builds a grid by evaluating `f(u, v)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for v in 0..height {
            for u in 0..width {
                data.push(f(u, v));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn map<U: Clone>(&self, mut f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|t| f(t)).collect(),
        }
    }
}

impl<T> Grid<T> {
    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn at(&self, u: usize, v: usize) -> &T {
        debug_assert!(u < self.width && v < self.height);
        &self.data[v * self.width + u]
    }

    #[inline]
    pub fn at_mut(&mut self, u: usize, v: usize) -> &mut T {
        debug_assert!(u < self.width && v < self.height);
        &mut self.data[v * self.width + u]
    }

    /// Bounds-checked access; `None` outside the grid.
    #[inline]
    pub fn get(&self, u: isize, v: isize) -> Option<&T> {
        if u < 0 || v < 0 || u as usize >= self.width || v as usize >= self.height {
            None
        } else {
            Some(&self.data[v as usize * self.width + u as usize])
        }
    }

    #[inline]
    pub fn row(&self, v: usize) -> &[T] {
        &self.data[v * self.width..(v + 1) * self.width]
    }

    #[inline]
    pub fn row_mut(&mut self, v: usize) -> &mut [T] {
        &mut self.data[v * self.width..(v + 1) * self.width]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    /// Iterates `(u, v, &value)` in row-major order.
    pub fn iter_pixels(&self) -> impl Iterator<Item = (usize, usize, &T)> {
        self.data
            .iter()
            .enumerate()
            .map(move |(i, t)| (i % self.width, i / self.width, t))
    }

    pub fn same_dims<U>(&self, other: &Grid<U>) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Errors with both dimension pairs when `other` does not match.
    pub fn require_same_dims<U>(&self, other: &Grid<U>) -> Result<()> {
        if self.same_dims(other) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected_w: self.width,
                expected_h: self.height,
                got_w: other.width,
                got_h: other.height,
            })
        }
    }
}

/// Structure-of-arrays grid of 3-vectors (per-pixel points or normals).
///
/// Component planes are kept separate so convolution passes can stream one
/// component at a time.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorGrid {
    pub x: Grid<f64>,
    pub y: Grid<f64>,
    pub z: Grid<f64>,
}

impl VectorGrid {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            x: Grid::filled(width, height, 0.0),
            y: Grid::filled(width, height, 0.0),
            z: Grid::filled(width, height, 0.0),
        }
    }

    pub fn width(&self) -> usize {
        self.x.width()
    }

    pub fn height(&self) -> usize {
        self.x.height()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.x.dims()
    }

    #[inline]
    pub fn at(&self, u: usize, v: usize) -> [f64; 3] {
        [*self.x.at(u, v), *self.y.at(u, v), *self.z.at(u, v)]
    }

    #[inline]
    pub fn set(&mut self, u: usize, v: usize, value: [f64; 3]) {
        *self.x.at_mut(u, v) = value[0];
        *self.y.at_mut(u, v) = value[1];
        *self.z.at_mut(u, v) = value[2];
    }

    pub fn component(&self, k: usize) -> &Grid<f64> {
        match k {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("vector component index {k} out of range"),
        }
    }
}

impl Grid<f64> {
    /// Treats NaN and non-positive values as invalid depth.
    pub fn depth_valid_at(&self, u: usize, v: usize) -> bool {
        let d = *self.at(u, v);
        d.is_finite() && d > 0.0
    }

    pub fn min_max(&self) -> Option<(f64, f64)> {
        let mut it = self.data.iter().filter(|v| v.is_finite());
        let first = *it.next()?;
        let mut lo = first;
        let mut hi = first;
        for &v in it {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        Some((lo, hi))
    }
}
