//! Pipeline configuration: one flat key=value file covering every stage,
//! with documented defaults, unknown-key rejection, and a stable hash.

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::footprint::{FeasibilityMode, MatchConfig};
use crate::geometry::GeometryConfig;
use crate::io::kv;
use crate::labeling::LabelConfig;
use crate::pose::PoseConfig;

/// Where the grasp-quality map comes from during detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QualitySourceConfig {
    /// Generated by the analytic labeler from the live scene (requires a
    /// background depth image).
    Analytic,
    /// Loaded from an externally produced file.
    External,
}

/// Complete pipeline configuration with documented defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub geometry: GeometryConfig,
    pub label: LabelConfig,
    pub pose: PoseConfig,
    /// Rotation discretization of the kernel stack, degrees.
    pub rotation_step_deg: f64,
    /// Rotation range, degrees; 180 by symmetry of the footprints.
    pub max_rotation_deg: f64,
    /// Regularizer of the inverse deviation penalty.
    pub epsilon: f64,
    /// Disabling the penalty reproduces the raw accumulation failure mode.
    pub std_penalty: bool,
    /// Keep the full feasibility stack in memory for diagnostics.
    pub emit_raw_stack: bool,
    pub quality_source: QualitySourceConfig,
    /// Reject (rather than clamp) out-of-range external quality values.
    pub strict_quality: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            geometry: GeometryConfig::default(),
            label: LabelConfig::default(),
            pose: PoseConfig::default(),
            rotation_step_deg: 5.0,
            max_rotation_deg: 180.0,
            epsilon: 0.1,
            std_penalty: true,
            emit_raw_stack: false,
            quality_source: QualitySourceConfig::Analytic,
            strict_quality: true,
        }
    }
}

impl PipelineConfig {
    pub fn match_config(&self) -> MatchConfig {
        MatchConfig {
            epsilon: self.epsilon,
            mode: if self.std_penalty {
                FeasibilityMode::Penalized
            } else {
                FeasibilityMode::RawAccumulation
            },
            emit_raw: self.emit_raw_stack,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.label.validate()?;
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.pose.max_grasps == 0 {
            return Err(Error::Config("max_grasps must be at least 1".into()));
        }
        Ok(())
    }

    /// Applies `key = value` overrides from a config file. Unknown keys are
    /// rejected.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let pairs = kv::read_kv_file(path)?;
        for (key, value) in &pairs {
            self.apply_pair(key, value)
                .map_err(|e| Error::parse(path, e.to_string()))?;
        }
        self.validate()
    }

    fn apply_pair(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("invalid value '{value}' for key '{key}'")))
        }
        match key {
            "hole_radius" => self.geometry.hole_radius = parse(key, value)?,
            "outlier_window" => self.geometry.outlier_window = parse(key, value)?,
            "outlier_z" => self.geometry.outlier_z = parse(key, value)?,
            "normal_window" => self.geometry.normal_window = parse(key, value)?,
            "std_window" => self.geometry.std_window = parse(key, value)?,
            "sigma_max" => self.geometry.sigma_max = parse(key, value)?,
            "w_std" => self.label.w_std = parse(key, value)?,
            "w_dist" => self.label.w_dist = parse(key, value)?,
            "graspable_threshold" => self.label.graspable_threshold = parse(key, value)?,
            "bg_depth_delta" => self.label.bg_depth_delta = parse(key, value)?,
            "min_cluster_size" => self.label.min_cluster_size = parse(key, value)?,
            "pixels_per_mm" => self.label.pixels_per_mm = parse(key, value)?,
            "quality_threshold" => self.pose.cluster_threshold = parse(key, value)?,
            "quality_min_cluster" => self.pose.cluster_min_size = parse(key, value)?,
            "min_selection_radius" => {
                self.pose.min_selection_radius_px = parse(key, value)?
            }
            "max_grasps" => self.pose.max_grasps = parse(key, value)?,
            "large_cluster_area" => {
                let area: usize = parse(key, value)?;
                self.pose.large_cluster_area_px = (area > 0).then_some(area);
            }
            "rotation_step" => self.rotation_step_deg = parse(key, value)?,
            "max_rotation" => self.max_rotation_deg = parse(key, value)?,
            "epsilon" => self.epsilon = parse(key, value)?,
            "std_penalty" => self.std_penalty = parse(key, value)?,
            "emit_raw_stack" => self.emit_raw_stack = parse(key, value)?,
            "quality_source" => {
                self.quality_source = match value {
                    "analytic" => QualitySourceConfig::Analytic,
                    "external" => QualitySourceConfig::External,
                    other => {
                        return Err(Error::Config(format!(
                            "quality_source must be 'analytic' or 'external', got '{other}'"
                        )))
                    }
                }
            }
            "strict_quality" => self.strict_quality = parse(key, value)?,
            other => {
                return Err(Error::Config(format!("unknown configuration key '{other}'")));
            }
        }
        Ok(())
    }

    /// Canonical serialization: every field in a fixed order. Parsing this
    /// text reproduces the configuration exactly.
    pub fn to_canonical_string(&self) -> String {
        let g = &self.geometry;
        let l = &self.label;
        let p = &self.pose;
        format!(
            "hole_radius = {}\noutlier_window = {}\noutlier_z = {}\nnormal_window = {}\n\
             std_window = {}\nsigma_max = {}\nw_std = {}\nw_dist = {}\n\
             graspable_threshold = {}\nbg_depth_delta = {}\nmin_cluster_size = {}\n\
             pixels_per_mm = {}\nquality_threshold = {}\nquality_min_cluster = {}\n\
             min_selection_radius = {}\nmax_grasps = {}\nlarge_cluster_area = {}\n\
             rotation_step = {}\nmax_rotation = {}\nepsilon = {}\nstd_penalty = {}\n\
             emit_raw_stack = {}\nquality_source = {}\nstrict_quality = {}\n",
            g.hole_radius,
            g.outlier_window,
            g.outlier_z,
            g.normal_window,
            g.std_window,
            g.sigma_max,
            l.w_std,
            l.w_dist,
            l.graspable_threshold,
            l.bg_depth_delta,
            l.min_cluster_size,
            l.pixels_per_mm,
            p.cluster_threshold,
            p.cluster_min_size,
            p.min_selection_radius_px,
            p.max_grasps,
            p.large_cluster_area_px.unwrap_or(0),
            self.rotation_step_deg,
            self.max_rotation_deg,
            self.epsilon,
            self.std_penalty,
            self.emit_raw_stack,
            match self.quality_source {
                QualitySourceConfig::Analytic => "analytic",
                QualitySourceConfig::External => "external",
            },
            self.strict_quality,
        )
    }

    /// Sixteen-hex-digit digest of the canonical serialization. Recorded in
    /// every output artifact.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_canonical_string().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}
