//! End-to-end detection pipeline with per-stage timing instrumentation.

use std::time::Instant;

use crate::config::{PipelineConfig, QualitySourceConfig};
use crate::error::{Error, Result};
use crate::footprint::{match_footprints, KernelStack, MatchMaps};
use crate::geometry::{
    deproject, estimate_normals, fill_depth_holes, normal_std_map, suppress_depth_outliers,
    GeometryMaps, SceneGrid,
};
use crate::grid::Grid;
use crate::labeling::{background_mask, cluster_graspable, generate_labels, ClusterMap};
use crate::pose::{pixel_to_pose, rank_grasps, select_pixels, GraspList};
use crate::quality::{QualityMap, QualitySource};

/// Inputs of one detection run.
#[derive(Debug, Clone)]
pub struct DetectInput {
    pub scene: SceneGrid,
    /// Empty-bin depth for background subtraction; required by the analytic
    /// quality source.
    pub background_depth: Option<Grid<f64>>,
    /// Externally produced quality map; required by the external source.
    pub external_quality: Option<QualityMap>,
}

/// Wall-clock stage timings in milliseconds.
#[derive(Debug, Clone, Default)]
pub struct StageTimings {
    pub preprocess_ms: f64,
    pub geometry_ms: f64,
    pub quality_ms: f64,
    pub matching_ms: f64,
    pub pose_ms: f64,
    pub total_ms: f64,
}

impl StageTimings {
    pub fn summary(&self) -> String {
        format!(
            "preprocess {:.1} ms, geometry {:.1} ms, quality {:.1} ms, matching {:.1} ms, \
             pose {:.1} ms, total {:.1} ms",
            self.preprocess_ms,
            self.geometry_ms,
            self.quality_ms,
            self.matching_ms,
            self.pose_ms,
            self.total_ms
        )
    }
}

/// Everything a detection run produces.
#[derive(Debug, Clone)]
pub struct DetectOutput {
    pub grasps: GraspList,
    pub quality: QualityMap,
    pub clusters: ClusterMap,
    pub match_maps: MatchMaps,
    pub geometry: GeometryMaps,
    pub timings: StageTimings,
    pub config_hash: String,
}

fn ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Runs preprocessing and geometry, returning the cleaned depth as well.
fn scene_geometry(
    scene: &SceneGrid,
    cfg: &PipelineConfig,
    timings: &mut StageTimings,
) -> Result<(Grid<f64>, GeometryMaps)> {
    let start = Instant::now();
    let filled = fill_depth_holes(&scene.depth, cfg.geometry.hole_radius);
    let cleaned =
        suppress_depth_outliers(&filled, cfg.geometry.outlier_window, cfg.geometry.outlier_z);
    timings.preprocess_ms = ms(start);

    let start = Instant::now();
    let (points, point_valid) = deproject(&cleaned, &scene.intrinsics);
    let (normals, normal_valid) =
        estimate_normals(&points, &point_valid, cfg.geometry.normal_window);
    let normal_std = normal_std_map(
        &normals,
        &normal_valid,
        cfg.geometry.std_window,
        cfg.geometry.sigma_max,
    );
    timings.geometry_ms = ms(start);
    Ok((
        cleaned,
        GeometryMaps {
            points,
            normals,
            normal_std,
            valid_mask: normal_valid,
        },
    ))
}

/// Full detection: preprocess, geometry, quality source, footprint
/// matching, pose extraction.
pub fn detect(
    input: &DetectInput,
    stack: &KernelStack,
    cfg: &PipelineConfig,
) -> Result<DetectOutput> {
    cfg.validate()?;
    let total_start = Instant::now();
    let mut timings = StageTimings::default();

    let (cleaned_depth, geometry) = scene_geometry(&input.scene, cfg, &mut timings)
        .map_err(|e| e.in_stage("geometry"))?;

    // Quality source. The object mask drives both labeling and clustering.
    let start = Instant::now();
    let object_mask = match &input.background_depth {
        Some(bg) => background_mask(&cleaned_depth, bg, cfg.label.bg_depth_delta)
            .map_err(|e| e.in_stage("quality"))?,
        None => Grid::filled(input.scene.width(), input.scene.height(), true),
    };
    let quality = match cfg.quality_source {
        QualitySourceConfig::Analytic => {
            if input.background_depth.is_none() {
                return Err(Error::Config(
                    "analytic quality source requires a background depth image".into(),
                )
                .in_stage("quality"));
            }
            let (labels, _) = generate_labels(&geometry, &object_mask, &cfg.label)
                .map_err(|e| e.in_stage("quality"))?;
            QualityMap {
                values: labels.values,
                source: QualitySource::Analytic,
            }
        }
        QualitySourceConfig::External => input
            .external_quality
            .clone()
            .ok_or_else(|| {
                Error::Config("external quality source requires a quality file".into())
                    .in_stage("quality")
            })?,
    };
    timings.quality_ms = ms(start);

    let start = Instant::now();
    let match_maps = match_footprints(
        &quality.values,
        &geometry.normals,
        &geometry.valid_mask,
        stack,
        &cfg.match_config(),
    )
    .map_err(|e| e.in_stage("matching"))?;
    timings.matching_ms = ms(start);

    let start = Instant::now();
    let clusters = cluster_graspable(
        &quality.values,
        &object_mask,
        cfg.pose.cluster_threshold,
        cfg.pose.cluster_min_size,
    )
    .map_err(|e| e.in_stage("pose"))?;
    let selections = select_pixels(
        &match_maps,
        &clusters,
        cfg.pose.min_selection_radius_px,
        cfg.pose.large_cluster_area_px,
    );
    let mut candidates = Vec::with_capacity(selections.len());
    for (pixel, cluster_id) in selections {
        // Selected pixels can sit on depth holes; such clusters simply
        // yield no candidate.
        if let Ok(candidate) = pixel_to_pose(pixel, cluster_id, &geometry, &match_maps, stack) {
            candidates.push(candidate);
        }
    }
    let grasps = rank_grasps(candidates, cfg.pose.max_grasps);
    timings.pose_ms = ms(start);

    timings.total_ms = ms(total_start);
    Ok(DetectOutput {
        grasps,
        quality,
        clusters,
        match_maps,
        geometry,
        timings,
        config_hash: cfg.hash(),
    })
}

/// Label-generation entry point: preprocess, geometry, then the analytic
/// labeler against a recorded background or provided object mask.
pub fn label_scene(
    scene: &SceneGrid,
    background_depth: Option<&Grid<f64>>,
    object_mask: Option<&Grid<bool>>,
    cfg: &PipelineConfig,
) -> Result<(QualityMap, ClusterMap)> {
    cfg.validate()?;
    let mut timings = StageTimings::default();
    let (cleaned_depth, geometry) = scene_geometry(scene, cfg, &mut timings)?;
    let mask = match (object_mask, background_depth) {
        (Some(mask), _) => {
            scene.depth.require_same_dims(mask)?;
            mask.clone()
        }
        (None, Some(bg)) => background_mask(&cleaned_depth, bg, cfg.label.bg_depth_delta)?,
        (None, None) => {
            return Err(Error::Config(
                "labeling needs a background depth image or instance masks".into(),
            ))
        }
    };
    generate_labels(&geometry, &mask, &cfg.label)
}
