//! HFGM binary grid format.
//!
//! Every file starts with a 64-byte little-endian header:
//!
//! | offset | size | field |
//! |---|---|---|
//! | 0  | 4 | magic `"HFGM"` |
//! | 4  | 4 | format version (u32, currently 1) |
//! | 8  | 4 | nx (u32) |
//! | 12 | 4 | ny (u32) |
//! | 16 | 8 | dx (f64, metres) |
//! | 24 | 8 | dy (f64, metres) |
//! | 32 | 2 | payload kind (u16): 0 = media map, 1 = scalar plane |
//! | 34 | 2 | PML thickness in cells (u16) |
//! | 36 | 4 | immersion tissue code (u32; media maps only) |
//! | 40 | 8 | Courant factor (f64) |
//! | 48 | 8 | boundary film coefficient H (f64; media maps only) |
//! | 56 | 8 | ambient bath temperature (f64; media maps only) |
//!
//! A **media map** payload holds `nx * ny` row-major records of six f64:
//! `eps_inf, delta_eps, sigma_s, tau, tissue label code, reserved(0)`.
//! A **scalar plane** payload holds `nx * ny` row-major f64 samples and is
//! used for field snapshots, power-deposition maps and temperature fields.
//!
//! Round trips are lossless: every number is stored as the exact f64 bits.

use crate::error::{Error, Result};
use crate::grid::{Cell, GridSpec};
use crate::media::MediaMap;
use crate::tissue::{DebyeParams, Tissue};
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::Array2;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const MAGIC: &[u8; 4] = b"HFGM";
pub const VERSION: u32 = 1;

const KIND_MEDIA: u16 = 0;
const KIND_PLANE: u16 = 1;

fn write_header<W: Write>(
    w: &mut W,
    grid: &GridSpec,
    kind: u16,
    immersion: u32,
    boundary_h: f64,
    ambient: f64,
) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(VERSION)?;
    w.write_u32::<LittleEndian>(grid.nx as u32)?;
    w.write_u32::<LittleEndian>(grid.ny as u32)?;
    w.write_f64::<LittleEndian>(grid.dx)?;
    w.write_f64::<LittleEndian>(grid.dy)?;
    w.write_u16::<LittleEndian>(kind)?;
    w.write_u16::<LittleEndian>(grid.pml_thickness as u16)?;
    w.write_u32::<LittleEndian>(immersion)?;
    w.write_f64::<LittleEndian>(grid.courant)?;
    w.write_f64::<LittleEndian>(boundary_h)?;
    w.write_f64::<LittleEndian>(ambient)?;
    Ok(())
}

struct Header {
    grid: GridSpec,
    kind: u16,
    immersion: u32,
    boundary_h: f64,
    ambient: f64,
}

fn read_header<R: Read>(r: &mut R) -> Result<Header> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Format("file shorter than the 64-byte header".into()))?;
    if &magic != MAGIC {
        return Err(Error::Format(format!(
            "bad magic at offset 0: expected {:?}, found {:?}",
            MAGIC, magic
        )));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != VERSION {
        return Err(Error::Format(format!(
            "unsupported format version {version} (expected {VERSION})"
        )));
    }
    let nx = r.read_u32::<LittleEndian>()? as usize;
    let ny = r.read_u32::<LittleEndian>()? as usize;
    let dx = r.read_f64::<LittleEndian>()?;
    let dy = r.read_f64::<LittleEndian>()?;
    let kind = r.read_u16::<LittleEndian>()?;
    let pml = r.read_u16::<LittleEndian>()? as usize;
    let immersion = r.read_u32::<LittleEndian>()?;
    let courant = r.read_f64::<LittleEndian>()?;
    let boundary_h = r.read_f64::<LittleEndian>()?;
    let ambient = r.read_f64::<LittleEndian>()?;
    if dy != dx {
        return Err(Error::Format(format!("non-square cells in header: dx={dx}, dy={dy}")));
    }
    let grid = GridSpec::new(nx, ny, dx, courant, pml).map_err(|e| Error::Format(e.to_string()))?;
    Ok(Header {
        grid,
        kind,
        immersion,
        boundary_h,
        ambient,
    })
}

/// Write a media map.
pub fn write_media(path: &Path, media: &MediaMap) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_header(
        &mut w,
        media.grid(),
        KIND_MEDIA,
        media.immersion().code(),
        media.boundary_h,
        media.ambient_temp,
    )?;
    let grid = *media.grid();
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let c = Cell::new(i, j);
            let d = media.debye_at(c);
            w.write_f64::<LittleEndian>(d.eps_inf)?;
            w.write_f64::<LittleEndian>(d.delta_eps)?;
            w.write_f64::<LittleEndian>(d.sigma_s)?;
            w.write_f64::<LittleEndian>(d.tau)?;
            w.write_f64::<LittleEndian>(media.tissue_at(c).code() as f64)?;
            w.write_f64::<LittleEndian>(0.0)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Read a media map.
pub fn read_media(path: &Path) -> Result<MediaMap> {
    let mut r = BufReader::new(File::open(path)?);
    let h = read_header(&mut r)?;
    if h.kind != KIND_MEDIA {
        return Err(Error::Format(format!(
            "expected a media-map payload (kind 0), found kind {}",
            h.kind
        )));
    }
    let immersion = Tissue::from_code(h.immersion)?;
    let n = h.grid.n_cells();
    let mut tissue = Vec::with_capacity(n);
    let mut debye = Vec::with_capacity(n);
    let mut buf = vec![0f64; 6];
    for k in 0..n {
        for slot in buf.iter_mut() {
            *slot = r.read_f64::<LittleEndian>().map_err(|_| {
                Error::Format(format!(
                    "truncated payload: expected {} cell records, file ends inside record {}",
                    n, k
                ))
            })?;
        }
        let label = buf[4];
        if label.fract() != 0.0 || label < 0.0 {
            return Err(Error::Format(format!("cell {k}: non-integer tissue label {label}")));
        }
        tissue.push(Tissue::from_code(label as u32)?);
        let d = DebyeParams::new(buf[0], buf[1], buf[2], buf[3]);
        d.validate()
            .map_err(|e| Error::Format(format!("cell {k}: {e}")))?;
        debye.push(d);
    }
    MediaMap::from_raw(h.grid, immersion, tissue, debye, h.boundary_h, h.ambient)
        .map_err(|e| Error::Format(e.to_string()))
}

/// Write a scalar plane (field snapshot, power map, temperature field).
/// The plane shape must be `(ny, nx)` matching the grid.
pub fn write_plane(path: &Path, grid: &GridSpec, plane: &Array2<f64>) -> Result<()> {
    if plane.dim() != (grid.ny, grid.nx) {
        return Err(Error::Format(format!(
            "plane shape {:?} does not match grid {}x{}",
            plane.dim(),
            grid.nx,
            grid.ny
        )));
    }
    let mut w = BufWriter::new(File::create(path)?);
    write_header(&mut w, grid, KIND_PLANE, 0, 0.0, 0.0)?;
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            w.write_f64::<LittleEndian>(plane[[j, i]])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Read a scalar plane along with the grid it was sampled on.
pub fn read_plane(path: &Path) -> Result<(GridSpec, Array2<f64>)> {
    let mut r = BufReader::new(File::open(path)?);
    let h = read_header(&mut r)?;
    if h.kind != KIND_PLANE {
        return Err(Error::Format(format!(
            "expected a scalar-plane payload (kind 1), found kind {}",
            h.kind
        )));
    }
    let n = h.grid.n_cells();
    let mut data = Vec::with_capacity(n);
    for k in 0..n {
        data.push(r.read_f64::<LittleEndian>().map_err(|_| {
            Error::Format(format!(
                "truncated payload: expected {} samples, file ends at sample {}",
                n, k
            ))
        })?);
    }
    let plane = Array2::from_shape_vec((h.grid.ny, h.grid.nx), data)
        .expect("length checked above");
    Ok((h.grid, plane))
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn sample_media() -> MediaMap {
        let grid = GridSpec::square(60, 1e-3).unwrap();
        let mut m = MediaMap::immersed(grid, Tissue::Water).unwrap();
        m.paint_disk((0.0, 0.0), 0.02, Tissue::Fibroglandular).unwrap();
        m.paint_disk((0.005, 0.0), 0.004, Tissue::Fat).unwrap();
        // a scaled cell exercises label/value independence
        let c = Cell::new(30, 30);
        let scaled = m.debye_at(c).scaled(0.65).unwrap();
        m.set_debye(c, scaled).unwrap();
        m
    }

    #[test]
    fn media_round_trip_is_lossless() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.hfgm");
        let media = sample_media();
        write_media(&path, &media).unwrap();
        let back = read_media(&path).unwrap();
        assert_eq!(media, back, "bit-exact media round trip");
    }

    #[test]
    fn plane_round_trip_is_lossless() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("p.hfgm");
        let grid = GridSpec::square(40, 0.5e-3).unwrap();
        let plane = Array2::from_shape_fn((40, 40), |(j, i)| (i as f64 * 1.37).sin() + j as f64);
        write_plane(&path, &grid, &plane).unwrap();
        let (g2, back) = read_plane(&path).unwrap();
        assert_eq!(g2, grid);
        assert_eq!(plane, back);
    }

    #[test]
    fn bad_magic_is_reported_with_offset() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("junk.hfgm");
        std::fs::write(&path, b"NOPE0000000000000000000000000000").unwrap();
        let err = read_media(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("offset 0"), "want offset in message, got: {msg}");
        assert_eq!(err.exit_code(), 4);
    }

    #[test]
    fn truncation_is_reported_with_counts() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("t.hfgm");
        write_media(&path, &sample_media()).unwrap();
        let full = std::fs::read(&path).unwrap();
        std::fs::write(&path, &full[..full.len() / 2]).unwrap();
        let msg = read_media(&path).unwrap_err().to_string();
        assert!(msg.contains("truncated"), "got: {msg}");
        assert!(msg.contains("3600"), "expected cell count in message, got: {msg}");
    }

    #[test]
    fn kind_mismatch_is_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("p.hfgm");
        let grid = GridSpec::square(40, 1e-3).unwrap();
        write_plane(&path, &grid, &Array2::zeros((40, 40))).unwrap();
        assert!(read_media(&path).is_err());
    }
}
