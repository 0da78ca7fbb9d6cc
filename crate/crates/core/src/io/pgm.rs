//! Binary PGM (P5) reader/writer, 8- and 16-bit.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::Grid;

fn read_header_token(reader: &mut impl Read, path: &Path) -> Result<String> {
    let mut token = Vec::new();
    let mut byte = [0u8; 1];
    let mut in_comment = false;
    loop {
        reader
            .read_exact(&mut byte)
            .map_err(|e| Error::io(path, e))?;
        let b = byte[0];
        if in_comment {
            if b == b'\n' {
                in_comment = false;
            }
            continue;
        }
        if b == b'#' && token.is_empty() {
            in_comment = true;
            continue;
        }
        if b.is_ascii_whitespace() {
            if token.is_empty() {
                continue;
            }
            break;
        }
        token.push(b);
    }
    String::from_utf8(token).map_err(|_| Error::parse(path, "non-UTF8 header token"))
}

/// Reads a binary PGM file. Returns the raw sample grid and its maxval.
pub fn read_pgm(path: &Path) -> Result<(Grid<u16>, u16)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let magic = read_header_token(&mut reader, path)?;
    if magic != "P5" {
        return Err(Error::parse(
            path,
            format!("expected binary PGM magic 'P5', got '{magic}'"),
        ));
    }
    let width: usize = read_header_token(&mut reader, path)?
        .parse()
        .map_err(|_| Error::parse(path, "invalid width"))?;
    let height: usize = read_header_token(&mut reader, path)?
        .parse()
        .map_err(|_| Error::parse(path, "invalid height"))?;
    let maxval: u32 = read_header_token(&mut reader, path)?
        .parse()
        .map_err(|_| Error::parse(path, "invalid maxval"))?;
    if width == 0 || height == 0 {
        return Err(Error::parse(path, "zero-sized image"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::parse(path, format!("maxval {maxval} out of range")));
    }
    let wide = maxval > 255;
    let mut buffer = vec![0u8; width * height * if wide { 2 } else { 1 }];
    reader
        .read_exact(&mut buffer)
        .map_err(|e| Error::io(path, e))?;
    let data: Vec<u16> = if wide {
        buffer
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect()
    } else {
        buffer.iter().map(|&b| b as u16).collect()
    };
    Ok((Grid::from_vec(width, height, data)?, maxval as u16))
}

/// Writes a grid of raw samples as binary PGM with the given maxval.
pub fn write_pgm(path: &Path, grid: &Grid<u16>, maxval: u16) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    let header = format!("P5\n{} {}\n{}\n", grid.width(), grid.height(), maxval);
    writer
        .write_all(header.as_bytes())
        .map_err(|e| Error::io(path, e))?;
    if maxval > 255 {
        for &s in grid.data() {
            writer
                .write_all(&s.to_be_bytes())
                .map_err(|e| Error::io(path, e))?;
        }
    } else {
        let bytes: Vec<u8> = grid.data().iter().map(|&s| s.min(255) as u8).collect();
        writer.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

/// Writes an intensity grid in [0, 1] as 8-bit PGM.
pub fn write_intensity(path: &Path, grid: &Grid<f64>) -> Result<()> {
    let raw = grid.map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u16);
    write_pgm(path, &raw, 255)
}
