//! Single-channel Portable Float Map reader/writer.
//!
//! Header: `Pf`, then `width height`, then the scale line. A negative scale
//! marks little-endian data. Rows are stored top-to-bottom, matching the
//! grid layout used throughout the pipeline.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::Grid;

fn read_token(reader: &mut impl Read, path: &Path) -> Result<String> {
    let mut token = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        match reader.read_exact(&mut byte) {
            Ok(()) => {}
            Err(e) => return Err(Error::io(path, e)),
        }
        if byte[0].is_ascii_whitespace() {
            if token.is_empty() {
                continue;
            }
            break;
        }
        token.push(byte[0]);
    }
    String::from_utf8(token).map_err(|_| Error::parse(path, "non-UTF8 header token"))
}

/// Reads a single-channel PFM file into a grid.
pub fn read_pfm(path: &Path) -> Result<Grid<f64>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);

    let magic = read_token(&mut reader, path)?;
    if magic != "Pf" {
        return Err(Error::parse(
            path,
            format!("expected single-channel PFM magic 'Pf', got '{magic}'"),
        ));
    }
    let width: usize = read_token(&mut reader, path)?
        .parse()
        .map_err(|_| Error::parse(path, "invalid width"))?;
    let height: usize = read_token(&mut reader, path)?
        .parse()
        .map_err(|_| Error::parse(path, "invalid height"))?;
    let scale: f64 = read_token(&mut reader, path)?
        .parse()
        .map_err(|_| Error::parse(path, "invalid scale"))?;
    if width == 0 || height == 0 {
        return Err(Error::parse(path, "zero-sized image"));
    }
    let little_endian = scale < 0.0;

    let mut buffer = vec![0u8; width * height * 4];
    reader
        .read_exact(&mut buffer)
        .map_err(|e| Error::io(path, e))?;
    let mut data = Vec::with_capacity(width * height);
    for chunk in buffer.chunks_exact(4) {
        let bytes = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let value = if little_endian {
            f32::from_le_bytes(bytes)
        } else {
            f32::from_be_bytes(bytes)
        };
        data.push(value as f64);
    }
    Grid::from_vec(width, height, data)
}

/// Writes a grid as single-channel little-endian PFM (scale `-1.0`).
pub fn write_pfm(path: &Path, grid: &Grid<f64>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    let header = format!("Pf\n{} {}\n-1.0\n", grid.width(), grid.height());
    writer
        .write_all(header.as_bytes())
        .map_err(|e| Error::io(path, e))?;
    for &v in grid.data() {
        writer
            .write_all(&(v as f32).to_le_bytes())
            .map_err(|e| Error::io(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_values_and_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("grid.pfm");
        let grid = Grid::from_fn(5, 3, |u, v| (v * 10 + u) as f64 * 0.125);
        write_pfm(&path, &grid).unwrap();
        let back = read_pfm(&path).unwrap();
        assert_eq!(back.dims(), (5, 3));
        // First stored row is the top row.
        assert_eq!(*back.at(0, 0), 0.0);
        assert_eq!(*back.at(4, 0), 0.5);
        assert_eq!(back, grid);
    }

    #[test]
    fn nan_survives_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nan.pfm");
        let mut grid = Grid::filled(2, 2, 1.0);
        *grid.at_mut(1, 0) = f64::NAN;
        write_pfm(&path, &grid).unwrap();
        let back = read_pfm(&path).unwrap();
        assert!(back.at(1, 0).is_nan());
        assert_eq!(*back.at(0, 1), 1.0);
    }

    #[test]
    fn rejects_color_pfm() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("color.pfm");
        std::fs::write(&path, b"PF\n1 1\n-1.0\n\0\0\0\0\0\0\0\0\0\0\0\0").unwrap();
        assert!(read_pfm(&path).is_err());
    }
}
