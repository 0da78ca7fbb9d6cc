//! Automatic grasp-quality label generation.
//!
//! Labels blend a surface-deviation score (`1 - normal_std`) with a
//! center-distance score over clustered graspable regions, masked by
//! depth-based background subtraction. Background pixels are exactly zero.

use crate::error::{Error, Result};
use crate::geometry::GeometryMaps;
use crate::grid::Grid;
use crate::quality::{QualityMap, QualitySource};

/// Weights and thresholds for label generation.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelConfig {
    /// Weight of the surface-deviation component.
    pub w_std: f64,
    /// Weight of the center-distance component.
    pub w_dist: f64,
    /// Minimum deviation score for a pixel to count as graspable.
    pub graspable_threshold: f64,
    /// Background subtraction margin in meters.
    pub bg_depth_delta: f64,
    /// Clusters below this pixel count are discarded.
    pub min_cluster_size: usize,
    /// Image scale used to express distances in millimeters.
    pub pixels_per_mm: f64,
}

impl Default for LabelConfig {
    fn default() -> Self {
        Self {
            w_std: 0.5,
            w_dist: 0.5,
            graspable_threshold: 0.8,
            bg_depth_delta: 0.01,
            min_cluster_size: 100,
            pixels_per_mm: 2.0,
        }
    }
}

impl LabelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.w_std < 0.0 || self.w_dist < 0.0 || self.w_std + self.w_dist <= 0.0 {
            return Err(Error::Config(format!(
                "label weights must be non-negative with a positive sum, got w_std={} w_dist={}",
                self.w_std, self.w_dist
            )));
        }
        if !(self.graspable_threshold > 0.0 && self.graspable_threshold < 1.0) {
            return Err(Error::Config(format!(
                "graspable_threshold must be in (0, 1), got {}",
                self.graspable_threshold
            )));
        }
        if !(self.pixels_per_mm > 0.0) {
            return Err(Error::Config("pixels_per_mm must be positive".into()));
        }
        Ok(())
    }

    /// Weights scaled to sum to one.
    pub fn normalized_weights(&self) -> (f64, f64) {
        let total = self.w_std + self.w_dist;
        (self.w_std / total, self.w_dist / total)
    }
}

/// Connected components of graspable pixels.
///
/// Ids are contiguous `1..=K`, assigned in order of each component's
/// top-left-most (row-major first) pixel; 0 is background.
#[derive(Debug, Clone)]
pub struct ClusterMap {
    pub labels: Grid<u32>,
    /// Arithmetic mean pixel per cluster, indexed by `id - 1`.
    pub centroids: Vec<(f64, f64)>,
    /// Pixel count per cluster, indexed by `id - 1`.
    pub sizes: Vec<usize>,
}

impl ClusterMap {
    pub fn len(&self) -> usize {
        self.centroids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centroids.is_empty()
    }
}

/// Object mask from depth-based background subtraction: a pixel is an object
/// pixel (`true`) iff the scene is shallower than the recorded background by
/// more than `delta`. Invalid pixels on either side count as background.
pub fn background_mask(
    scene_depth: &Grid<f64>,
    background_depth: &Grid<f64>,
    delta: f64,
) -> Result<Grid<bool>> {
    scene_depth.require_same_dims(background_depth)?;
    let (w, h) = scene_depth.dims();
    Ok(Grid::from_fn(w, h, |u, v| {
        let s = *scene_depth.at(u, v);
        let b = *background_depth.at(u, v);
        s.is_finite() && s > 0.0 && b.is_finite() && b > 0.0 && (b - s) > delta
    }))
}

/// Union of instance masks as the object mask. An empty list means
/// everything is background; overlaps are permitted.
pub fn mask_from_instances(instance_masks: &[Grid<bool>]) -> Result<Grid<bool>> {
    let Some(first) = instance_masks.first() else {
        return Ok(Grid::filled(0, 0, false));
    };
    let (w, h) = first.dims();
    let mut out = Grid::filled(w, h, false);
    for mask in instance_masks {
        first.require_same_dims(mask)?;
        for (dst, &src) in out.data_mut().iter_mut().zip(mask.data()) {
            *dst |= src;
        }
    }
    Ok(out)
}

/// 8-connected components of `{object pixels with score >= threshold}`,
/// discarding components smaller than `min_size`.
pub fn cluster_graspable(
    score: &Grid<f64>,
    object_mask: &Grid<bool>,
    threshold: f64,
    min_size: usize,
) -> Result<ClusterMap> {
    score.require_same_dims(object_mask)?;
    let (w, h) = score.dims();
    let eligible =
        |u: usize, v: usize| *object_mask.at(u, v) && *score.at(u, v) >= threshold;

    let mut labels: Grid<u32> = Grid::filled(w, h, 0);
    let mut centroids = Vec::new();
    let mut sizes = Vec::new();
    let mut stack: Vec<(usize, usize)> = Vec::new();

    // Row-major scan assigns canonical ids by each component's first pixel.
    for v in 0..h {
        for u in 0..w {
            if *labels.at(u, v) != 0 || !eligible(u, v) {
                continue;
            }
            let id = centroids.len() as u32 + 1;
            let mut sum_u = 0.0f64;
            let mut sum_v = 0.0f64;
            let mut count = 0usize;
            stack.push((u, v));
            *labels.at_mut(u, v) = id;
            while let Some((cu, cv)) = stack.pop() {
                sum_u += cu as f64;
                sum_v += cv as f64;
                count += 1;
                for dv in -1i64..=1 {
                    for du in -1i64..=1 {
                        if du == 0 && dv == 0 {
                            continue;
                        }
                        let (nu, nv) = (cu as i64 + du, cv as i64 + dv);
                        if nu < 0 || nv < 0 || nu as usize >= w || nv as usize >= h {
                            continue;
                        }
                        let (nu, nv) = (nu as usize, nv as usize);
                        if *labels.at(nu, nv) == 0 && eligible(nu, nv) {
                            *labels.at_mut(nu, nv) = id;
                            stack.push((nu, nv));
                        }
                    }
                }
            }
            centroids.push((sum_u / count as f64, sum_v / count as f64));
            sizes.push(count);
        }
    }

    // Drop undersized components and re-number the survivors in scan order.
    let mut remap = vec![0u32; centroids.len() + 1];
    let mut kept_centroids = Vec::new();
    let mut kept_sizes = Vec::new();
    for (idx, (&size, &centroid)) in sizes.iter().zip(centroids.iter()).enumerate() {
        if size >= min_size {
            kept_centroids.push(centroid);
            kept_sizes.push(size);
            remap[idx + 1] = kept_centroids.len() as u32;
        }
    }
    for label in labels.data_mut() {
        *label = remap[*label as usize];
    }
    Ok(ClusterMap {
        labels,
        centroids: kept_centroids,
        sizes: kept_sizes,
    })
}

/// Inward distance transform over the clusters: each cluster pixel carries
/// the Euclidean distance (converted to millimeters) to the nearest
/// non-cluster pixel, so values peak at cluster interiors. Zero outside.
pub fn distance_component(clusters: &ClusterMap, pixels_per_mm: f64) -> Grid<f64> {
    let squared = squared_edt_to_zero(&clusters.labels);
    squared.map(|&d2| d2.sqrt() / pixels_per_mm)
}

/// Exact squared Euclidean distance from every nonzero pixel to the nearest
/// zero pixel (two-pass 1-D lower-envelope method). Pixels outside the grid
/// count as zero, so border pixels are at distance 1.
fn squared_edt_to_zero(labels: &Grid<u32>) -> Grid<f64> {
    let (w, h) = labels.dims();

    // Column pass: 1-D distance to the nearest zero in each column, with a
    // virtual zero one pixel beyond each end.
    let mut column = Grid::filled(w, h, 0.0f64);
    for u in 0..w {
        let mut dist = 1.0f64;
        for v in 0..h {
            dist = if *labels.at(u, v) == 0 { 0.0 } else { dist + 1.0 };
            *column.at_mut(u, v) = dist;
        }
        let mut dist = 1.0f64;
        for v in (0..h).rev() {
            dist = if *labels.at(u, v) == 0 { 0.0 } else { dist + 1.0 };
            let c = column.at_mut(u, v);
            if dist < *c {
                *c = dist;
            }
        }
    }

    // Row pass: lower envelope of the parabolas f(u') + (u - u')^2 over
    // sites u' in {-1, 0 .. w-1, w}; the two virtual border sites carry
    // height zero. Site coordinates are strictly increasing, so the
    // intersection abscissa is always finite.
    let n = w + 2;
    let mut f = vec![0.0f64; n];
    let mut site = vec![0.0f64; n];
    let mut hull_site = vec![0usize; n];
    let mut hull_from = vec![0.0f64; n + 1];
    let mut out = Grid::filled(w, h, 0.0f64);
    site[0] = -1.0;
    for u in 0..w {
        site[u + 1] = u as f64;
    }
    site[n - 1] = w as f64;

    for row in 0..h {
        f[0] = 0.0;
        for u in 0..w {
            let c = *column.at(u, row);
            f[u + 1] = c * c;
        }
        f[n - 1] = 0.0;

        let mut k = 0usize;
        hull_site[0] = 0;
        hull_from[0] = f64::NEG_INFINITY;
        hull_from[1] = f64::INFINITY;
        for q in 1..n {
            loop {
                let vk = hull_site[k];
                let s = ((f[q] + site[q] * site[q]) - (f[vk] + site[vk] * site[vk]))
                    / (2.0 * site[q] - 2.0 * site[vk]);
                if s <= hull_from[k] {
                    k -= 1;
                    continue;
                }
                k += 1;
                hull_site[k] = q;
                hull_from[k] = s;
                hull_from[k + 1] = f64::INFINITY;
                break;
            }
        }

        let mut k = 0usize;
        for u in 0..w {
            let q = u as f64;
            while hull_from[k + 1] < q {
                k += 1;
            }
            let vk = hull_site[k];
            let d = q - site[vk];
            *out.at_mut(u, row) = f[vk] + d * d;
        }
    }
    out
}

/// Combines the deviation and distance components into labels.
///
/// Object pixels receive `w_std * score + w_dist * dist'` where `dist'` is
/// the distance map rescaled per image to [0, 1]; background pixels are
/// exactly zero; the result is clamped to [0, 1].
pub fn compose_labels(
    deviation_score: &Grid<f64>,
    distance: &Grid<f64>,
    object_mask: &Grid<bool>,
    cfg: &LabelConfig,
) -> Result<QualityMap> {
    deviation_score.require_same_dims(distance)?;
    deviation_score.require_same_dims(object_mask)?;
    cfg.validate()?;
    let (w_std, w_dist) = cfg.normalized_weights();
    let max_dist = distance
        .data()
        .iter()
        .copied()
        .fold(0.0f64, f64::max);
    let dist_scale = if max_dist > 0.0 { 1.0 / max_dist } else { 0.0 };
    let (w, h) = deviation_score.dims();
    let values = Grid::from_fn(w, h, |u, v| {
        if !*object_mask.at(u, v) {
            return 0.0;
        }
        let label =
            w_std * *deviation_score.at(u, v) + w_dist * *distance.at(u, v) * dist_scale;
        label.clamp(0.0, 1.0)
    });
    QualityMap::new(values, QualitySource::Analytic)
}

/// Runs the full labeler on computed geometry: deviation score, clustering,
/// distance transform, composition.
pub fn generate_labels(
    geo: &GeometryMaps,
    object_mask: &Grid<bool>,
    cfg: &LabelConfig,
) -> Result<(QualityMap, ClusterMap)> {
    cfg.validate()?;
    let deviation_score = deviation_score(geo);
    let clusters = cluster_graspable(
        &deviation_score,
        object_mask,
        cfg.graspable_threshold,
        cfg.min_cluster_size,
    )?;
    let distance = distance_component(&clusters, cfg.pixels_per_mm);
    let labels = compose_labels(&deviation_score, &distance, object_mask, cfg)?;
    Ok((labels, clusters))
}

/// The deviation-based graspability score `1 - normal_std`, zero at invalid
/// pixels.
pub fn deviation_score(geo: &GeometryMaps) -> Grid<f64> {
    let (w, h) = geo.normal_std.dims();
    Grid::from_fn(w, h, |u, v| {
        if *geo.valid_mask.at(u, v) {
            1.0 - *geo.normal_std.at(u, v)
        } else {
            0.0
        }
    })
}
