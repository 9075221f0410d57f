//! Dependency-free binary PGM/PPM image IO and ASCII PLY mesh export.

use crate::sim::ClothMesh;
use crate::{Error, Result};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

fn malformed(path: &Path, detail: impl Into<String>) -> Error {
    Error::Malformed { path: path.display().to_string(), detail: detail.into() }
}

/// Read magic + dimensions + maxval, skipping comments, then return the
/// reader positioned at the first raster byte.
fn read_netpbm_header(path: &Path, expected_magic: &str) -> Result<(BufReader<std::fs::File>, usize, usize, u32)> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let mut fields: Vec<String> = Vec::new();
    let mut magic = String::new();
    // token scanner: magic, width, height, maxval; single whitespace after maxval
    while fields.len() < 3 || magic.is_empty() {
        let mut byte = [0u8; 1];
        if r.read(&mut byte)? == 0 {
            return Err(malformed(path, "truncated header"));
        }
        let c = byte[0] as char;
        if c == '#' {
            let mut line = String::new();
            r.read_line(&mut line)?;
            continue;
        }
        if c.is_whitespace() {
            continue;
        }
        // start of a token
        let mut tok = String::new();
        tok.push(c);
        loop {
            let mut b = [0u8; 1];
            if r.read(&mut b)? == 0 {
                break;
            }
            let ch = b[0] as char;
            if ch.is_whitespace() {
                break;
            }
            tok.push(ch);
        }
        if magic.is_empty() {
            magic = tok;
            if magic != expected_magic {
                return Err(malformed(path, format!("magic {magic}, expected {expected_magic}")));
            }
        } else {
            fields.push(tok);
        }
    }
    let w: usize = fields[0].parse().map_err(|_| malformed(path, "bad width"))?;
    let h: usize = fields[1].parse().map_err(|_| malformed(path, "bad height"))?;
    let maxval: u32 = fields[2].parse().map_err(|_| malformed(path, "bad maxval"))?;
    Ok((r, w, h, maxval))
}

/// 16-bit binary PGM (big-endian raster, per the Netpbm convention).
pub fn write_pgm16(path: &Path, rows: usize, cols: usize, data: &[u16]) -> Result<()> {
    if data.len() != rows * cols {
        return Err(Error::InvalidArgument("pgm16 data length mismatch".into()));
    }
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    write!(w, "P5\n{cols} {rows}\n65535\n")?;
    for &v in data {
        w.write_all(&v.to_be_bytes())?;
    }
    Ok(())
}

pub fn read_pgm16(path: &Path) -> Result<(usize, usize, Vec<u16>)> {
    let (mut r, w, h, maxval) = read_netpbm_header(path, "P5")?;
    if maxval != 65535 {
        return Err(malformed(path, format!("expected 16-bit PGM, maxval {maxval}")));
    }
    let mut buf = vec![0u8; w * h * 2];
    r.read_exact(&mut buf).map_err(|_| malformed(path, "truncated raster"))?;
    let data = buf.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect();
    Ok((h, w, data))
}

/// 8-bit binary PGM.
pub fn write_pgm8(path: &Path, rows: usize, cols: usize, data: &[u8]) -> Result<()> {
    if data.len() != rows * cols {
        return Err(Error::InvalidArgument("pgm8 data length mismatch".into()));
    }
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    write!(w, "P5\n{cols} {rows}\n255\n")?;
    w.write_all(data)?;
    Ok(())
}

pub fn read_pgm8(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let (mut r, w, h, maxval) = read_netpbm_header(path, "P5")?;
    if maxval != 255 {
        return Err(malformed(path, format!("expected 8-bit PGM, maxval {maxval}")));
    }
    let mut data = vec![0u8; w * h];
    r.read_exact(&mut data).map_err(|_| malformed(path, "truncated raster"))?;
    Ok((h, w, data))
}

/// 8-bit binary PPM, interleaved RGB.
pub fn write_ppm8(path: &Path, rows: usize, cols: usize, data: &[u8]) -> Result<()> {
    if data.len() != rows * cols * 3 {
        return Err(Error::InvalidArgument("ppm8 data length mismatch".into()));
    }
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    write!(w, "P6\n{cols} {rows}\n255\n")?;
    w.write_all(data)?;
    Ok(())
}

pub fn read_ppm8(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let (mut r, w, h, maxval) = read_netpbm_header(path, "P6")?;
    if maxval != 255 {
        return Err(malformed(path, format!("expected 8-bit PPM, maxval {maxval}")));
    }
    let mut data = vec![0u8; w * h * 3];
    r.read_exact(&mut data).map_err(|_| malformed(path, "truncated raster"))?;
    Ok((h, w, data))
}

/// ASCII PLY export: row-major vertices, grid quads split into triangles.
/// Coordinates print with Rust's shortest round-trip float formatting, so a
/// re-import reproduces them bit-exactly.
pub fn write_ply(mesh: &ClothMesh, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    let tris = mesh.triangles();
    writeln!(w, "ply")?;
    writeln!(w, "format ascii 1.0")?;
    writeln!(w, "comment grid {} {}", mesh.grid_h(), mesh.grid_w())?;
    writeln!(w, "element vertex {}", mesh.vertex_count())?;
    writeln!(w, "property double x")?;
    writeln!(w, "property double y")?;
    writeln!(w, "property double z")?;
    writeln!(w, "element face {}", tris.len())?;
    writeln!(w, "property list uchar int vertex_indices")?;
    writeln!(w, "end_header")?;
    for v in mesh.vertices() {
        writeln!(w, "{} {} {}", v[0], v[1], v[2])?;
    }
    for t in tris {
        writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    Ok(())
}

/// Re-import a PLY written by [`write_ply`] (relies on its grid comment).
pub fn read_ply(path: &Path) -> Result<ClothMesh> {
    let content = std::fs::read_to_string(path)?;
    let mut lines = content.lines();
    let mut grid = None;
    let mut n_vertices = None;
    for line in lines.by_ref() {
        if let Some(rest) = line.strip_prefix("comment grid ") {
            let dims: Vec<usize> =
                rest.split_whitespace().filter_map(|t| t.parse().ok()).collect();
            if dims.len() == 2 {
                grid = Some((dims[0], dims[1]));
            }
        } else if let Some(rest) = line.strip_prefix("element vertex ") {
            n_vertices = rest.trim().parse().ok();
        } else if line.trim() == "end_header" {
            break;
        }
    }
    let (gh, gw) = grid.ok_or_else(|| malformed(path, "missing grid comment"))?;
    let n = n_vertices.ok_or_else(|| malformed(path, "missing vertex element"))?;
    let mut vertices = Vec::with_capacity(n);
    for _ in 0..n {
        let line = lines.next().ok_or_else(|| malformed(path, "truncated vertex list"))?;
        let coords: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| malformed(path, "bad vertex coordinate")))
            .collect::<Result<_>>()?;
        if coords.len() != 3 {
            return Err(malformed(path, "vertex line must have 3 coordinates"));
        }
        vertices.push([coords[0], coords[1], coords[2]]);
    }
    ClothMesh::new(gh, gw, vertices)
}
