//! Text descriptions of synthetic scenes.
//!
//! ```text
//! [scene]
//! seed = 42
//! noise_sigma = 0.00015
//! hole_rate = 0.001
//! [bin]
//! floor_depth = 0.5
//! width = 0.20
//! depth = 0.15
//! wall_height = 0.025
//! wall_thickness = 0.006
//! [primitive]
//! shape = box
//! cx = 0.02
//! cy = -0.01
//! yaw = 30
//! width = 0.06
//! depth = 0.05
//! height = 0.03
//! ```

use std::path::Path;

use crate::error::{Error, Result};
use crate::io::kv;
use crate::scenegen::{BinGeometry, Primitive, PrimitiveScene, Shape};

pub fn read_scene(path: &Path) -> Result<PrimitiveScene> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let sections = kv::parse_sections(&text, path)?;
    let mut bin = BinGeometry::default();
    let mut seed = 0u64;
    let mut noise_sigma_m = 0.0;
    let mut hole_rate = 0.0;
    let mut primitives = Vec::new();
    for section in &sections {
        let pairs = &section.pairs;
        match section.name.as_str() {
            "scene" => {
                seed = kv::optional(pairs, "seed", path)?.unwrap_or(0);
                noise_sigma_m = kv::optional(pairs, "noise_sigma", path)?.unwrap_or(0.0);
                hole_rate = kv::optional(pairs, "hole_rate", path)?.unwrap_or(0.0);
            }
            "bin" => {
                bin = BinGeometry {
                    floor_depth_m: kv::require(pairs, "floor_depth", path)?,
                    width_m: kv::require(pairs, "width", path)?,
                    depth_m: kv::require(pairs, "depth", path)?,
                    wall_height_m: kv::optional(pairs, "wall_height", path)?
                        .unwrap_or(BinGeometry::default().wall_height_m),
                    wall_thickness_m: kv::optional(pairs, "wall_thickness", path)?
                        .unwrap_or(BinGeometry::default().wall_thickness_m),
                };
            }
            "primitive" => {
                let shape_name: String = kv::require(pairs, "shape", path)?;
                let shape = match shape_name.as_str() {
                    "box" => Shape::Box {
                        width_m: kv::require(pairs, "width", path)?,
                        depth_m: kv::require(pairs, "depth", path)?,
                        height_m: kv::require(pairs, "height", path)?,
                    },
                    "cylinder" => Shape::Cylinder {
                        radius_m: kv::require(pairs, "radius", path)?,
                        height_m: kv::require(pairs, "height", path)?,
                    },
                    "wedge" => Shape::Wedge {
                        width_m: kv::require(pairs, "width", path)?,
                        length_m: kv::require(pairs, "length", path)?,
                        height_m: kv::require(pairs, "height", path)?,
                    },
                    other => {
                        return Err(Error::parse(
                            path,
                            format!("unknown primitive shape '{other}'"),
                        ))
                    }
                };
                primitives.push(Primitive {
                    shape,
                    cx_m: kv::require(pairs, "cx", path)?,
                    cy_m: kv::require(pairs, "cy", path)?,
                    yaw_deg: kv::optional(pairs, "yaw", path)?.unwrap_or(0.0),
                });
            }
            other => {
                return Err(Error::parse(path, format!("unexpected section '[{other}]'")));
            }
        }
    }
    let scene = PrimitiveScene {
        bin,
        primitives,
        noise_sigma_m,
        hole_rate,
        seed,
    };
    scene.validate()?;
    Ok(scene)
}

pub fn format_scene(scene: &PrimitiveScene) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "[scene]\nseed = {}\nnoise_sigma = {}\nhole_rate = {}\n",
        scene.seed, scene.noise_sigma_m, scene.hole_rate
    ));
    out.push_str(&format!(
        "[bin]\nfloor_depth = {}\nwidth = {}\ndepth = {}\nwall_height = {}\nwall_thickness = {}\n",
        scene.bin.floor_depth_m,
        scene.bin.width_m,
        scene.bin.depth_m,
        scene.bin.wall_height_m,
        scene.bin.wall_thickness_m
    ));
    for p in &scene.primitives {
        out.push_str("[primitive]\n");
        match p.shape {
            Shape::Box {
                width_m,
                depth_m,
                height_m,
            } => {
                out.push_str(&format!(
                    "shape = box\nwidth = {width_m}\ndepth = {depth_m}\nheight = {height_m}\n"
                ));
            }
            Shape::Cylinder { radius_m, height_m } => {
                out.push_str(&format!(
                    "shape = cylinder\nradius = {radius_m}\nheight = {height_m}\n"
                ));
            }
            Shape::Wedge {
                width_m,
                length_m,
                height_m,
            } => {
                out.push_str(&format!(
                    "shape = wedge\nwidth = {width_m}\nlength = {length_m}\nheight = {height_m}\n"
                ));
            }
        }
        out.push_str(&format!("cx = {}\ncy = {}\nyaw = {}\n", p.cx_m, p.cy_m, p.yaw_deg));
    }
    out
}

pub fn write_scene(path: &Path, scene: &PrimitiveScene) -> Result<()> {
    std::fs::write(path, format_scene(scene)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenegen::{edge_wrapping_scene, random_scene, RandomSceneParams};

    #[test]
    fn scene_round_trips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scene.txt");
        let scene = random_scene(5, &RandomSceneParams::default()).unwrap();
        write_scene(&path, &scene).unwrap();
        let back = read_scene(&path).unwrap();
        assert_eq!(scene, back);
    }

    #[test]
    fn edge_scene_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("edge.txt");
        let scene = edge_wrapping_scene();
        write_scene(&path, &scene).unwrap();
        assert_eq!(read_scene(&path).unwrap(), scene);
    }
}
