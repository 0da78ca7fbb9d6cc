//! Pixel selection and conversion of match results into 6-DoF grasp poses.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::footprint::{KernelStack, MatchMaps};
use crate::geometry::GeometryMaps;
use crate::labeling::ClusterMap;
use crate::math::{minimal_rotation, rotation_about_axis};

/// A single 6-DoF grasp candidate.
#[derive(Debug, Clone)]
pub struct GraspCandidate {
    /// Source pixel (u, v).
    pub pixel: (usize, usize),
    /// Grasp position in the camera frame, meters.
    pub position: Vector3<f64>,
    /// Unit grasp axis, stored pointing from the surface toward the camera
    /// (negative z). The gripper descends along the negated axis.
    pub approach: Vector3<f64>,
    /// Gripper yaw about the approach axis, degrees.
    pub yaw_deg: f64,
    /// Index of the winning footprint in the kernel stack.
    pub footprint_idx: usize,
    pub footprint_name: String,
    pub gripper_type: u32,
    /// Feasibility score of the winning channel at the source pixel.
    pub score: f64,
    /// Cluster the candidate was selected from (1-based).
    pub cluster_id: u32,
}

impl GraspCandidate {
    /// Full gripper orientation: the gripper z-axis is aligned to the
    /// approach axis by the minimal rotation from (0, 0, -1), then rotated
    /// by yaw about that axis. Columns are the gripper axes in the camera
    /// frame; orthonormal with determinant +1.
    pub fn orientation(&self) -> Matrix3<f64> {
        let reference = Vector3::new(0.0, 0.0, -1.0);
        let align = minimal_rotation(&reference, &self.approach);
        let yaw = rotation_about_axis(&Vector3::z(), self.yaw_deg.to_radians());
        align * yaw
    }
}

/// Ranked grasp candidates, descending score.
#[derive(Debug, Clone, Default)]
pub struct GraspList {
    pub grasps: Vec<GraspCandidate>,
}

impl GraspList {
    pub fn len(&self) -> usize {
        self.grasps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grasps.is_empty()
    }
}

/// Selection parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseConfig {
    /// Quality threshold for clustering the grasp-quality map.
    pub cluster_threshold: f64,
    /// Minimum cluster size in pixels.
    pub cluster_min_size: usize,
    /// Lower bound on the selection radius around each cluster centroid.
    pub min_selection_radius_px: f64,
    /// Maximum number of grasps returned per scene.
    pub max_grasps: usize,
    /// Clusters larger than this area may receive additional candidates;
    /// `None` keeps strictly one grasp per cluster.
    pub large_cluster_area_px: Option<usize>,
}

impl Default for PoseConfig {
    fn default() -> Self {
        Self {
            cluster_threshold: 0.3,
            cluster_min_size: 100,
            min_selection_radius_px: 3.0,
            max_grasps: 20,
            large_cluster_area_px: None,
        }
    }
}

/// Picks the grasp pixel for each cluster: the argmax of `o_q` over cluster
/// pixels within the selection radius of the centroid. The radius is half
/// the cluster's equivalent-circle radius, floored at `min_radius_px`. Ties
/// break toward the smaller row-major index. Clusters whose restricted
/// region carries no positive feasibility are skipped.
///
/// When `large_cluster_area_px` is set, clusters exceeding that area receive
/// up to two extra candidates spaced at least one diameter apart.
pub fn select_pixels(
    match_maps: &MatchMaps,
    clusters: &ClusterMap,
    min_radius_px: f64,
    large_cluster_area_px: Option<usize>,
) -> Vec<((usize, usize), u32)> {
    let (w, h) = match_maps.o_q.dims();
    let mut selected = Vec::new();
    for idx in 0..clusters.len() {
        let id = idx as u32 + 1;
        let (cu, cv) = clusters.centroids[idx];
        let size = clusters.sizes[idx];
        let radius = (0.5 * (size as f64 / std::f64::consts::PI).sqrt()).max(min_radius_px);

        let best = argmax_in_disk(match_maps, clusters, id, (cu, cv), radius, &[]);
        let Some(first) = best else {
            continue;
        };
        selected.push((first, id));

        if let Some(area) = large_cluster_area_px {
            if size > area {
                let extra = ((size / area.max(1)) - 1).min(2);
                let mut placed = vec![first];
                for _ in 0..extra {
                    // Search the whole cluster, away from prior picks.
                    let cluster_radius = (size as f64 / std::f64::consts::PI).sqrt() * 2.0;
                    if let Some(next) = argmax_in_disk(
                        match_maps,
                        clusters,
                        id,
                        (cu, cv),
                        cluster_radius.max(w.max(h) as f64),
                        &placed,
                    ) {
                        placed.push(next);
                        selected.push((next, id));
                    }
                }
            }
        }
    }
    selected
}

/// Argmax of `o_q` over pixels of cluster `id` within `radius` of `center`,
/// at least `2 * radius_spacing` away from the `exclude` pixels. Returns
/// `None` when the region is empty or carries no positive value.
fn argmax_in_disk(
    match_maps: &MatchMaps,
    clusters: &ClusterMap,
    id: u32,
    center: (f64, f64),
    radius: f64,
    exclude: &[(usize, usize)],
) -> Option<(usize, usize)> {
    let (w, h) = match_maps.o_q.dims();
    let u_lo = ((center.0 - radius).floor().max(0.0)) as usize;
    let v_lo = ((center.1 - radius).floor().max(0.0)) as usize;
    let u_hi = ((center.0 + radius).ceil() as usize + 1).min(w);
    let v_hi = ((center.1 + radius).ceil() as usize + 1).min(h);
    let r2 = radius * radius;
    let spacing2 = radius * radius * 4.0;
    let mut best: Option<((usize, usize), f64)> = None;
    for v in v_lo..v_hi {
        for u in u_lo..u_hi {
            if *clusters.labels.at(u, v) != id {
                continue;
            }
            let du = u as f64 - center.0;
            let dv = v as f64 - center.1;
            if du * du + dv * dv > r2 {
                continue;
            }
            if exclude.iter().any(|&(eu, ev)| {
                let d2 = (eu as f64 - u as f64).powi(2) + (ev as f64 - v as f64).powi(2);
                d2 < spacing2
            }) {
                continue;
            }
            let q = *match_maps.o_q.at(u, v);
            if q <= 0.0 {
                continue;
            }
            // Strict > keeps the smaller row-major index on ties.
            if best.map_or(true, |(_, bq)| q > bq) {
                best = Some(((u, v), q));
            }
        }
    }
    best.map(|(pixel, _)| pixel)
}

/// Converts one selected pixel into a full grasp candidate.
pub fn pixel_to_pose(
    pixel: (usize, usize),
    cluster_id: u32,
    geo: &GeometryMaps,
    match_maps: &MatchMaps,
    stack: &KernelStack,
) -> Result<GraspCandidate> {
    let (u, v) = pixel;
    if !*geo.valid_mask.at(u, v) {
        return Err(Error::InvalidPixel {
            u,
            v,
            reason: "no valid point/normal at the selected pixel".into(),
        });
    }
    let score = *match_maps.o_q.at(u, v);
    if !(score > 0.0) {
        return Err(Error::InvalidPixel {
            u,
            v,
            reason: format!("non-positive feasibility {score}"),
        });
    }
    let p = geo.points.at(u, v);
    let n = geo.normals.at(u, v);
    let footprint_idx = *match_maps.o_type.at(u, v) as usize;
    let info = stack.footprint(footprint_idx);
    Ok(GraspCandidate {
        pixel,
        position: Vector3::new(p[0], p[1], p[2]),
        approach: Vector3::new(n[0], n[1], n[2]),
        yaw_deg: *match_maps.o_rot.at(u, v),
        footprint_idx,
        footprint_name: info.name.clone(),
        gripper_type: info.gripper_type,
        score,
        cluster_id,
    })
}

/// Orders candidates by descending score with a deterministic tie-break on
/// (cluster id, row-major pixel) and truncates to `max_grasps`.
pub fn rank_grasps(mut candidates: Vec<GraspCandidate>, max_grasps: usize) -> GraspList {
    candidates.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.cluster_id.cmp(&b.cluster_id))
            .then_with(|| (a.pixel.1, a.pixel.0).cmp(&(b.pixel.1, b.pixel.0)))
    });
    candidates.truncate(max_grasps);
    GraspList { grasps: candidates }
}
