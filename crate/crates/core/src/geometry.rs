//! Scene geometry: depth preprocessing, ordered point cloud, surface normals,
//! and the per-pixel normal-deviation channel.
//!
//! All operations are pure; outputs are freshly allocated. Invalid depth is
//! NaN or a non-positive value; a boolean validity mask accompanies every
//! derived map.

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::camera::CameraIntrinsics;
use crate::error::{Error, Result};
use crate::grid::{Grid, VectorGrid};
use crate::math::{smallest_eigenvector_sym3, VARIANCE_FLOOR};
use crate::windows::WindowedSums;

/// Registered per-pixel scene channels plus camera intrinsics.
#[derive(Debug, Clone)]
pub struct SceneGrid {
    pub intensity: Grid<f64>,
    pub depth: Grid<f64>,
    pub intrinsics: CameraIntrinsics,
}

impl SceneGrid {
    /// Builds a scene grid, checking that the channels are registered and
    /// that every valid depth value is strictly positive and finite.
    pub fn new(
        intensity: Grid<f64>,
        depth: Grid<f64>,
        intrinsics: CameraIntrinsics,
    ) -> Result<Self> {
        intensity.require_same_dims(&depth)?;
        intrinsics.validate()?;
        Ok(Self {
            intensity,
            depth,
            intrinsics,
        })
    }

    pub fn width(&self) -> usize {
        self.depth.width()
    }

    pub fn height(&self) -> usize {
        self.depth.height()
    }
}

/// Geometric feature maps derived from one scene grid.
#[derive(Debug, Clone)]
pub struct GeometryMaps {
    /// Ordered point cloud in the camera frame (meters).
    pub points: VectorGrid,
    /// Unit surface normals, oriented toward the camera (negative z).
    /// Invalid pixels hold the zero vector.
    pub normals: VectorGrid,
    /// Combined per-component normal deviation, normalized to [0, 1].
    pub normal_std: Grid<f64>,
    /// True where both the point and the normal are usable.
    pub valid_mask: Grid<bool>,
}

/// Parameters for the geometry stage.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryConfig {
    /// Maximum hole radius filled by the expanding-window median (pixels).
    pub hole_radius: usize,
    /// Odd window for outlier suppression.
    pub outlier_window: usize,
    /// Median-deviation multiplier above which a pixel counts as an outlier.
    pub outlier_z: f64,
    /// Odd window for the local plane fit.
    pub normal_window: usize,
    /// Odd window for the normal-deviation map. Sized to the single
    /// suction-cup diameter in pixels by default.
    pub std_window: usize,
    /// Deviation value mapped to 1.0 after normalization.
    pub sigma_max: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            hole_radius: 5,
            outlier_window: 5,
            outlier_z: 3.0,
            normal_window: 7,
            std_window: 41,
            sigma_max: 0.5,
        }
    }
}

impl GeometryConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, w) in [
            ("outlier_window", self.outlier_window),
            ("normal_window", self.normal_window),
            ("std_window", self.std_window),
        ] {
            if w < 3 || w % 2 == 0 {
                return Err(Error::Config(format!("{name} must be odd and >= 3, got {w}")));
            }
        }
        if !(self.sigma_max > 0.0) {
            return Err(Error::Config(format!(
                "sigma_max must be positive, got {}",
                self.sigma_max
            )));
        }
        Ok(())
    }
}

#[inline]
fn depth_valid(d: f64) -> bool {
    d.is_finite() && d > 0.0
}

fn median_of(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Fills invalid pixels whose nearest valid pixel lies within
/// `max_hole_radius` with the median of valid pixels in the smallest odd
/// window containing one. Valid pixels are returned unchanged.
pub fn fill_depth_holes(depth: &Grid<f64>, max_hole_radius: usize) -> Grid<f64> {
    let (w, h) = depth.dims();
    let mut out = depth.clone();
    let mut buf: Vec<f64> = Vec::new();
    for v in 0..h {
        for u in 0..w {
            if depth_valid(*depth.at(u, v)) {
                continue;
            }
            for radius in 1..=max_hole_radius {
                buf.clear();
                let r = radius as isize;
                for dv in -r..=r {
                    for du in -r..=r {
                        if let Some(&d) = depth.get(u as isize + du, v as isize + dv) {
                            if depth_valid(d) {
                                buf.push(d);
                            }
                        }
                    }
                }
                if !buf.is_empty() {
                    *out.at_mut(u, v) = median_of(&mut buf);
                    break;
                }
            }
        }
    }
    out
}

/// Replaces pixels deviating from their window median by more than
/// `z_thresh` times the local median absolute deviation with the median.
/// Invalid pixels are left untouched and excluded from the statistics.
pub fn suppress_depth_outliers(depth: &Grid<f64>, window: usize, z_thresh: f64) -> Grid<f64> {
    assert!(window >= 3 && window % 2 == 1, "window must be odd and >= 3");
    let (w, h) = depth.dims();
    let r = window as isize / 2;
    let mut out = depth.clone();
    let rows: Vec<Vec<f64>> = (0..h)
        .into_par_iter()
        .map(|v| {
            let mut buf: Vec<f64> = Vec::with_capacity(window * window);
            let mut row = Vec::with_capacity(w);
            for u in 0..w {
                let d = *depth.at(u, v);
                if !depth_valid(d) {
                    row.push(d);
                    continue;
                }
                buf.clear();
                for dv in -r..=r {
                    for du in -r..=r {
                        if let Some(&n) = depth.get(u as isize + du, v as isize + dv) {
                            if depth_valid(n) {
                                buf.push(n);
                            }
                        }
                    }
                }
                let med = median_of(&mut buf);
                for b in buf.iter_mut() {
                    *b = (*b - med).abs();
                }
                let mad = median_of(&mut buf);
                if (d - med).abs() > z_thresh * mad {
                    row.push(med);
                } else {
                    row.push(d);
                }
            }
            row
        })
        .collect();
    for (v, row) in rows.into_iter().enumerate() {
        out.row_mut(v).copy_from_slice(&row);
    }
    out
}

/// Back-projects a depth grid through the camera into an ordered point
/// cloud. Invalid pixels hold the zero point and are false in the mask.
pub fn deproject(depth: &Grid<f64>, intrinsics: &CameraIntrinsics) -> (VectorGrid, Grid<bool>) {
    let (w, h) = depth.dims();
    let mut points = VectorGrid::zeros(w, h);
    let mut valid = Grid::filled(w, h, false);
    for v in 0..h {
        for u in 0..w {
            let d = *depth.at(u, v);
            if depth_valid(d) {
                let p = intrinsics.deproject(u as f64, v as f64, d);
                points.set(u, v, [p.x, p.y, p.z]);
                *valid.at_mut(u, v) = true;
            }
        }
    }
    (points, valid)
}

/// Per-pixel unit normals from a least-squares plane fit over the valid
/// points in an odd window, as the smallest-eigenvalue eigenvector of the
/// local covariance. Normals are oriented toward the camera (negative z).
/// Pixels with fewer than 3 valid points in the window, or whose fitted
/// plane is seen edge-on, become invalid.
pub fn estimate_normals(
    points: &VectorGrid,
    valid: &Grid<bool>,
    window: usize,
) -> (VectorGrid, Grid<bool>) {
    assert!(window >= 3 && window % 2 == 1, "window must be odd and >= 3");
    let (w, h) = points.dims();

    // Shift coordinates by the global centroid before accumulating moments.
    // The covariance is translation invariant, and small shifted values keep
    // the E[pp'] - E[p]E[p]' cancellation well conditioned in the summed
    // area tables.
    let mut centroid = [0.0f64; 3];
    let mut n_valid = 0.0f64;
    for v in 0..h {
        for u in 0..w {
            if *valid.at(u, v) {
                let p = points.at(u, v);
                centroid[0] += p[0];
                centroid[1] += p[1];
                centroid[2] += p[2];
                n_valid += 1.0;
            }
        }
    }
    if n_valid > 0.0 {
        for c in centroid.iter_mut() {
            *c /= n_valid;
        }
    }

    let mut planes: Vec<Grid<f64>> = vec![Grid::filled(w, h, 0.0); 9];
    for v in 0..h {
        for u in 0..w {
            if !*valid.at(u, v) {
                continue;
            }
            let p = points.at(u, v);
            let (x, y, z) = (p[0] - centroid[0], p[1] - centroid[1], p[2] - centroid[2]);
            *planes[0].at_mut(u, v) = x;
            *planes[1].at_mut(u, v) = y;
            *planes[2].at_mut(u, v) = z;
            *planes[3].at_mut(u, v) = x * x;
            *planes[4].at_mut(u, v) = x * y;
            *planes[5].at_mut(u, v) = x * z;
            *planes[6].at_mut(u, v) = y * y;
            *planes[7].at_mut(u, v) = y * z;
            *planes[8].at_mut(u, v) = z * z;
        }
    }
    let plane_refs: Vec<&Grid<f64>> = planes.iter().collect();
    let sums = WindowedSums::new(&plane_refs, valid);

    let mut normals = VectorGrid::zeros(w, h);
    let mut out_valid = Grid::filled(w, h, false);
    let results: Vec<Vec<Option<[f64; 3]>>> = (0..h)
        .into_par_iter()
        .map(|v| {
            let mut row = Vec::with_capacity(w);
            for u in 0..w {
                if !*valid.at(u, v) {
                    row.push(None);
                    continue;
                }
                let count = sums.count(u, v, window);
                if count < 3.0 {
                    row.push(None);
                    continue;
                }
                let inv = 1.0 / count;
                let mx = sums.sum(0, u, v, window) * inv;
                let my = sums.sum(1, u, v, window) * inv;
                let mz = sums.sum(2, u, v, window) * inv;
                let cov = [
                    sums.sum(3, u, v, window) * inv - mx * mx,
                    sums.sum(4, u, v, window) * inv - mx * my,
                    sums.sum(5, u, v, window) * inv - mx * mz,
                    sums.sum(6, u, v, window) * inv - my * my,
                    sums.sum(7, u, v, window) * inv - my * mz,
                    sums.sum(8, u, v, window) * inv - mz * mz,
                ];
                let mut n = smallest_eigenvector_sym3(cov);
                if n.z > 0.0 {
                    n = -n;
                }
                if n.z > -1e-12 {
                    // Edge-on plane: no usable camera-facing normal.
                    row.push(None);
                    continue;
                }
                row.push(Some([n.x, n.y, n.z]));
            }
            row
        })
        .collect();
    for (v, row) in results.into_iter().enumerate() {
        for (u, entry) in row.into_iter().enumerate() {
            if let Some(n) = entry {
                normals.set(u, v, n);
                *out_valid.at_mut(u, v) = true;
            }
        }
    }
    (normals, out_valid)
}

/// Combined standard deviation of the normal components over an odd window,
/// divided by `sigma_max` and clamped to [0, 1]. Invalid pixels yield 0.
pub fn normal_std_map(
    normals: &VectorGrid,
    valid: &Grid<bool>,
    window: usize,
    sigma_max: f64,
) -> Grid<f64> {
    assert!(window >= 3 && window % 2 == 1, "window must be odd and >= 3");
    assert!(sigma_max > 0.0, "sigma_max must be positive");
    let (w, h) = normals.dims();
    let squares: [Grid<f64>; 3] = [
        normals.x.map(|v| v * v),
        normals.y.map(|v| v * v),
        normals.z.map(|v| v * v),
    ];
    let planes: [&Grid<f64>; 6] = [
        &normals.x, &normals.y, &normals.z, &squares[0], &squares[1], &squares[2],
    ];
    let sums = WindowedSums::new(&planes, valid);
    Grid::from_fn(w, h, |u, v| {
        if !*valid.at(u, v) {
            return 0.0;
        }
        let count = sums.count(u, v, window);
        if count < 2.0 {
            return 0.0;
        }
        let inv = 1.0 / count;
        let mut total_var = 0.0;
        for k in 0..3 {
            let mean = sums.sum(k, u, v, window) * inv;
            let var = sums.sum(k + 3, u, v, window) * inv - mean * mean;
            if var > VARIANCE_FLOOR {
                total_var += var;
            }
        }
        (total_var.sqrt() / sigma_max).clamp(0.0, 1.0)
    })
}

/// Runs the full geometry stage: hole filling, outlier suppression,
/// deprojection, normal estimation, and the normal-deviation map.
pub fn compute_geometry(scene: &SceneGrid, cfg: &GeometryConfig) -> Result<GeometryMaps> {
    cfg.validate()?;
    let filled = fill_depth_holes(&scene.depth, cfg.hole_radius);
    let cleaned = suppress_depth_outliers(&filled, cfg.outlier_window, cfg.outlier_z);
    let (points, point_valid) = deproject(&cleaned, &scene.intrinsics);
    let (normals, normal_valid) = estimate_normals(&points, &point_valid, cfg.normal_window);
    let normal_std = normal_std_map(&normals, &normal_valid, cfg.std_window, cfg.sigma_max);
    Ok(GeometryMaps {
        points,
        normals,
        normal_std,
        valid_mask: normal_valid,
    })
}

#[allow(unused)]
pub(crate) fn normal_at(normals: &VectorGrid, u: usize, v: usize) -> Vector3<f64> {
    let n = normals.at(u, v);
    Vector3::new(n[0], n[1], n[2])
}
