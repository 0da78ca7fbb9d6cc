//! Footprint set files.
//!
//! A set file holds one `[footprint]` section per member:
//!
//! ```text
//! [footprint]
//! name = cup20
//! gripper_type = 1
//! pixels_per_mm = 2.0
//! cups = 0,0,10            # dx,dy,radius in mm; ';' separates cups
//!
//! [footprint]
//! name = plate
//! gripper_type = 3
//! pixels_per_mm = 2.0
//! pattern = plate.pgm      # 8-bit PGM, 255 = full contact
//! ```
//!
//! Exactly one of `cups` or `pattern` must be present. Pattern paths are
//! resolved relative to the set file.

use std::path::Path;

use crate::error::{Error, Result};
use crate::footprint::{Cup, Footprint};
use crate::io::{kv, pgm};

/// Reads a footprint set file.
pub fn read_footprint_set(path: &Path) -> Result<Vec<Footprint>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let sections = kv::parse_sections(&text, path)?;
    let mut footprints = Vec::new();
    for section in &sections {
        if section.name != "footprint" {
            return Err(Error::parse(
                path,
                format!("unexpected section '[{}]'", section.name),
            ));
        }
        let pairs = &section.pairs;
        let name: String = kv::require(pairs, "name", path)?;
        let gripper_type: u32 = kv::require(pairs, "gripper_type", path)?;
        let pixels_per_mm: f64 = kv::require(pairs, "pixels_per_mm", path)?;
        let cups = kv::lookup(pairs, "cups");
        let pattern = kv::lookup(pairs, "pattern");
        let footprint = match (cups, pattern) {
            (Some(cups), None) => {
                let cups = parse_cups(cups, path)?;
                Footprint::from_cups(name, gripper_type, cups, pixels_per_mm)?
            }
            (None, Some(pattern_rel)) => {
                let pattern_path = path
                    .parent()
                    .unwrap_or_else(|| Path::new("."))
                    .join(pattern_rel);
                let (raw, maxval) = pgm::read_pgm(&pattern_path)?;
                let scale = 1.0 / maxval as f64;
                let pattern = raw.map(|&s| s as f64 * scale);
                Footprint::from_pattern(name, gripper_type, pattern, pixels_per_mm)?
            }
            (Some(_), Some(_)) => {
                return Err(Error::parse(
                    path,
                    format!("footprint '{name}' has both cups and pattern"),
                ))
            }
            (None, None) => {
                return Err(Error::parse(
                    path,
                    format!("footprint '{name}' needs either cups or pattern"),
                ))
            }
        };
        footprints.push(footprint);
    }
    if footprints.is_empty() {
        return Err(Error::parse(path, "footprint set file has no footprints"));
    }
    Ok(footprints)
}

fn parse_cups(text: &str, path: &Path) -> Result<Vec<Cup>> {
    let mut cups = Vec::new();
    for entry in text.split(';') {
        let fields: Vec<&str> = entry.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(Error::parse(
                path,
                format!("cup entry '{entry}' must be 'dx,dy,radius' in mm"),
            ));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::parse(path, format!("invalid cup coordinate '{s}'")))
        };
        cups.push(Cup {
            dx_mm: parse(fields[0])?,
            dy_mm: parse(fields[1])?,
            radius_mm: parse(fields[2])?,
        });
    }
    Ok(cups)
}

/// Writes a footprint set file. Pattern footprints are stored as PGM files
/// next to the set file.
pub fn write_footprint_set(path: &Path, footprints: &[Footprint]) -> Result<()> {
    let mut text = String::new();
    for fp in footprints {
        text.push_str("[footprint]\n");
        text.push_str(&format!("name = {}\n", fp.name));
        text.push_str(&format!("gripper_type = {}\n", fp.gripper_type));
        text.push_str(&format!("pixels_per_mm = {}\n", fp.pixels_per_mm));
        match &fp.cups {
            Some(cups) => {
                let cups_text: Vec<String> = cups
                    .iter()
                    .map(|c| format!("{},{},{}", c.dx_mm, c.dy_mm, c.radius_mm))
                    .collect();
                text.push_str(&format!("cups = {}\n", cups_text.join(" ; ")));
            }
            None => {
                let pgm_name = format!("{}.pgm", fp.name);
                let pgm_path = path
                    .parent()
                    .unwrap_or_else(|| Path::new("."))
                    .join(&pgm_name);
                let raw = fp
                    .pattern
                    .map(|&p| (p.clamp(0.0, 1.0) * 255.0).round() as u16);
                pgm::write_pgm(&pgm_path, &raw, 255)?;
                text.push_str(&format!("pattern = {pgm_name}\n"));
            }
        }
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::footprint::default_footprint_set;

    #[test]
    fn default_set_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("footprints.txt");
        let set = default_footprint_set();
        write_footprint_set(&path, &set).unwrap();
        let back = read_footprint_set(&path).unwrap();
        assert_eq!(back.len(), set.len());
        for (a, b) in set.iter().zip(&back) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.gripper_type, b.gripper_type);
            assert_eq!(a.cups, b.cups);
            assert_eq!(a.pattern, b.pattern);
        }
    }

    #[test]
    fn pattern_footprint_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("set.txt");
        let mut pattern = crate::grid::Grid::filled(5, 5, 0.0);
        for u in 1..4 {
            for v in 1..4 {
                *pattern.at_mut(u, v) = 1.0;
            }
        }
        let fp = Footprint::from_pattern("blob", 7, pattern, 2.0).unwrap();
        write_footprint_set(&path, &[fp]).unwrap();
        let back = read_footprint_set(&path).unwrap();
        assert_eq!(back[0].name, "blob");
        assert_eq!(back[0].gripper_type, 7);
        assert_eq!(*back[0].pattern.at(2, 2), 1.0);
        assert_eq!(*back[0].pattern.at(0, 0), 0.0);
    }

    #[test]
    fn missing_source_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("set.txt");
        std::fs::write(
            &path,
            "[footprint]\nname = x\ngripper_type = 1\npixels_per_mm = 2\n",
        )
        .unwrap();
        assert!(read_footprint_set(&path).is_err());
    }
}
