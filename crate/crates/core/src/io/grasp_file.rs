//! Line-delimited grasp records.
//!
//! One line per grasp with fixed field order and units:
//! `u v x y z ax ay az yaw footprint gripper_type score`
//! (pixel; meters; unit approach vector; degrees; name; id; feasibility).
//! Header comments carry the scene id and configuration hash. Formatting is
//! deterministic so identical detections produce byte-identical files.

use std::path::Path;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::pose::{GraspCandidate, GraspList};

const COLUMNS: &str = "u v x y z ax ay az yaw footprint gripper_type score";

/// Serializes a grasp list to its on-disk text form.
pub fn format_grasps(scene_id: &str, config_hash: &str, grasps: &GraspList) -> String {
    let mut out = String::new();
    out.push_str("# grasps v1\n");
    out.push_str(&format!("# scene = {scene_id}\n"));
    out.push_str(&format!("# config = {config_hash}\n"));
    out.push_str(&format!("# columns: {COLUMNS}\n"));
    for g in &grasps.grasps {
        out.push_str(&format!(
            "{} {} {:.9} {:.9} {:.9} {:.9} {:.9} {:.9} {:.3} {} {} {:.9}\n",
            g.pixel.0,
            g.pixel.1,
            g.position.x,
            g.position.y,
            g.position.z,
            g.approach.x,
            g.approach.y,
            g.approach.z,
            g.yaw_deg,
            g.footprint_name,
            g.gripper_type,
            g.score
        ));
    }
    out
}

pub fn write_grasps(
    path: &Path,
    scene_id: &str,
    config_hash: &str,
    grasps: &GraspList,
) -> Result<()> {
    std::fs::write(path, format_grasps(scene_id, config_hash, grasps))
        .map_err(|e| Error::io(path, e))
}

/// A parsed grasp file.
#[derive(Debug, Clone)]
pub struct GraspFile {
    pub scene_id: String,
    pub config_hash: String,
    pub grasps: GraspList,
}

pub fn read_grasps(path: &Path) -> Result<GraspFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut scene_id = None;
    let mut config_hash = None;
    let mut grasps = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(value) = comment.strip_prefix("scene =") {
                scene_id = Some(value.trim().to_string());
            } else if let Some(value) = comment.strip_prefix("config =") {
                config_hash = Some(value.trim().to_string());
            }
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 12 {
            return Err(Error::parse(
                path,
                format!("line {}: expected 12 fields, got {}", lineno + 1, fields.len()),
            ));
        }
        let parse_f = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::parse(path, format!("line {}: bad number '{s}'", lineno + 1)))
        };
        let parse_u = |s: &str| -> Result<usize> {
            s.parse()
                .map_err(|_| Error::parse(path, format!("line {}: bad index '{s}'", lineno + 1)))
        };
        grasps.push(GraspCandidate {
            pixel: (parse_u(fields[0])?, parse_u(fields[1])?),
            position: Vector3::new(parse_f(fields[2])?, parse_f(fields[3])?, parse_f(fields[4])?),
            approach: Vector3::new(parse_f(fields[5])?, parse_f(fields[6])?, parse_f(fields[7])?),
            yaw_deg: parse_f(fields[8])?,
            footprint_idx: 0,
            footprint_name: fields[9].to_string(),
            gripper_type: fields[10].parse().map_err(|_| {
                Error::parse(path, format!("line {}: bad gripper id", lineno + 1))
            })?,
            score: parse_f(fields[11])?,
            cluster_id: 0,
        });
    }
    Ok(GraspFile {
        scene_id: scene_id
            .ok_or_else(|| Error::parse(path, "missing '# scene =' header"))?,
        config_hash: config_hash
            .ok_or_else(|| Error::parse(path, "missing '# config =' header"))?,
        grasps: GraspList { grasps },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_list() -> GraspList {
        GraspList {
            grasps: vec![
                GraspCandidate {
                    pixel: (412, 303),
                    position: Vector3::new(0.0123, -0.0456, 0.5),
                    approach: Vector3::new(0.0, 0.1, -0.9949874371).normalize(),
                    yaw_deg: 35.0,
                    footprint_idx: 1,
                    footprint_name: "pair26".into(),
                    gripper_type: 2,
                    score: 4.938,
                    cluster_id: 1,
                },
                GraspCandidate {
                    pixel: (100, 20),
                    position: Vector3::new(-0.05, 0.02, 0.48),
                    approach: Vector3::new(0.0, 0.0, -1.0),
                    yaw_deg: 0.0,
                    footprint_idx: 0,
                    footprint_name: "cup20".into(),
                    gripper_type: 1,
                    score: 3.2,
                    cluster_id: 2,
                },
            ],
        }
    }

    #[test]
    fn round_trip_preserves_records() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scene1.grasps.txt");
        let list = sample_list();
        write_grasps(&path, "scene1", "deadbeef00112233", &list).unwrap();
        let back = read_grasps(&path).unwrap();
        assert_eq!(back.scene_id, "scene1");
        assert_eq!(back.config_hash, "deadbeef00112233");
        assert_eq!(back.grasps.len(), 2);
        let g = &back.grasps.grasps[0];
        assert_eq!(g.pixel, (412, 303));
        assert_eq!(g.footprint_name, "pair26");
        assert_eq!(g.gripper_type, 2);
        assert!((g.score - 4.938).abs() < 1e-6);
        assert!((g.position.x - 0.0123).abs() < 1e-9);
    }

    #[test]
    fn formatting_is_deterministic() {
        let list = sample_list();
        let a = format_grasps("s", "h", &list);
        let b = format_grasps("s", "h", &list);
        assert_eq!(a, b);
    }

    #[test]
    fn missing_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.txt");
        std::fs::write(&path, "# grasps v1\n").unwrap();
        assert!(read_grasps(&path).is_err());
    }
}
