//! Ground-truth files: quality PFM, 16-bit instance PGM, and a metadata
//! sidecar per scene.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::evaluation::{Difficulty, SceneGroundTruth};
use crate::io::{kv, pfm, pgm};

/// File stems produced for scene `id`: `<id>.gt_quality.pfm`,
/// `<id>.instances.pgm`, `<id>.gt.txt`.
pub fn ground_truth_paths(dir: &Path, scene_id: &str) -> (PathBuf, PathBuf, PathBuf) {
    (
        dir.join(format!("{scene_id}.gt_quality.pfm")),
        dir.join(format!("{scene_id}.instances.pgm")),
        dir.join(format!("{scene_id}.gt.txt")),
    )
}

pub fn write_ground_truth(dir: &Path, gt: &SceneGroundTruth) -> Result<()> {
    let (quality_path, instances_path, meta_path) = ground_truth_paths(dir, &gt.scene_id);
    pfm::write_pfm(&quality_path, &gt.gt_quality)?;
    let raw = gt.instance_ids.map(|&id| {
        debug_assert!(id <= u16::MAX as u32);
        id as u16
    });
    pgm::write_pgm(&instances_path, &raw, u16::MAX)?;
    let meta = format!("scene_id = {}\ndifficulty = {}\n", gt.scene_id, gt.difficulty);
    std::fs::write(&meta_path, meta).map_err(|e| Error::io(&meta_path, e))
}

/// Reads the ground truth for one scene given its `.gt.txt` metadata path.
pub fn read_ground_truth(meta_path: &Path) -> Result<SceneGroundTruth> {
    let pairs = kv::read_kv_file(meta_path)?;
    let scene_id: String = kv::require(&pairs, "scene_id", meta_path)?;
    let difficulty: Difficulty = kv::require(&pairs, "difficulty", meta_path)?;
    let dir = meta_path.parent().unwrap_or_else(|| Path::new("."));
    let (quality_path, instances_path, _) = ground_truth_paths(dir, &scene_id);
    let gt_quality = pfm::read_pfm(&quality_path)?;
    let (instances_raw, _) = pgm::read_pgm(&instances_path)?;
    let instance_ids = instances_raw.map(|&s| s as u32);
    // Clamp away sub-epsilon negatives from the f32 storage round trip.
    let gt_quality = gt_quality.map(|&q| q.clamp(0.0, 1.0));
    SceneGroundTruth::new(scene_id, gt_quality, instance_ids, difficulty)
}

/// Finds every `*.gt.txt` under `dir`, sorted by scene id.
pub fn list_ground_truth(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path
            .file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.ends_with(".gt.txt"))
        {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    #[test]
    fn ground_truth_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let instances = Grid::from_fn(12, 10, |u, _| if u < 6 { 0u32 } else { 3 });
        let quality = Grid::from_fn(12, 10, |u, _| if u < 6 { 0.0 } else { 0.625 });
        let gt = SceneGroundTruth::new("scene_42", quality, instances, Difficulty::Typical)
            .unwrap();
        write_ground_truth(dir.path(), &gt).unwrap();
        let metas = list_ground_truth(dir.path()).unwrap();
        assert_eq!(metas.len(), 1);
        let back = read_ground_truth(&metas[0]).unwrap();
        assert_eq!(back.scene_id, "scene_42");
        assert_eq!(back.difficulty, Difficulty::Typical);
        assert_eq!(back.instance_ids.data(), gt.instance_ids.data());
        assert_eq!(*back.gt_quality.at(8, 5), 0.625);
    }
}
