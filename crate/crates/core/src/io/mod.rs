//! File formats: PFM and PGM grids, key=value sidecars, footprint sets,
//! grasp records, ground truth, and scene descriptions.
//!
//! PFM files are single-channel, little-endian (scale field `-1.0`), with
//! rows stored top-to-bottom.

pub mod footprint_file;
pub mod grasp_file;
pub mod ground_truth;
pub mod kv;
pub mod pfm;
pub mod pgm;
pub mod scene_file;

use std::path::Path;

use crate::camera::CameraIntrinsics;
use crate::error::{Error, Result};
use crate::grid::Grid;

/// Reads a depth grid: PFM directly, or 16-bit PGM with a `<file>.meta`
/// sidecar carrying `depth_scale` in meters per unit.
pub fn read_depth(path: &Path) -> Result<Grid<f64>> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("pfm") => pfm::read_pfm(path),
        Some("pgm") => {
            let (raw, _maxval) = pgm::read_pgm(path)?;
            let meta_path = path.with_extension("pgm.meta");
            let pairs = kv::read_kv_file(&meta_path)?;
            let scale: f64 = kv::require(&pairs, "depth_scale", &meta_path)?;
            Ok(raw.map(|&r| {
                if r == 0 {
                    f64::NAN
                } else {
                    r as f64 * scale
                }
            }))
        }
        other => Err(Error::parse(
            path,
            format!("unsupported depth format {other:?}, expected .pfm or .pgm"),
        )),
    }
}

/// Reads an 8- or 16-bit PGM intensity image normalized to [0, 1].
pub fn read_intensity(path: &Path) -> Result<Grid<f64>> {
    let (raw, maxval) = pgm::read_pgm(path)?;
    let scale = 1.0 / maxval as f64;
    Ok(raw.map(|&r| r as f64 * scale))
}

/// Reads camera intrinsics from a key=value text file with `fx`, `fy`,
/// `cx`, `cy` in pixels.
pub fn read_intrinsics(path: &Path) -> Result<CameraIntrinsics> {
    let pairs = kv::read_kv_file(path)?;
    CameraIntrinsics::new(
        kv::require(&pairs, "fx", path)?,
        kv::require(&pairs, "fy", path)?,
        kv::require(&pairs, "cx", path)?,
        kv::require(&pairs, "cy", path)?,
    )
}

/// Writes camera intrinsics as a key=value text file.
pub fn write_intrinsics(path: &Path, k: &CameraIntrinsics) -> Result<()> {
    let text = format!("fx = {}\nfy = {}\ncx = {}\ncy = {}\n", k.fx, k.fy, k.cx, k.cy);
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
