//! CSV writers/readers for weights, channels and time series.
//!
//! All floats are written with `{:.17e}` so a read-back reproduces the exact
//! f64 (17 significant digits round-trip any double).

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

/// Write beamformer weights: one row per antenna with real/imaginary parts
/// and the phase in radians.
pub fn write_weights(path: &Path, weights: &[Complex64]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "antenna,re,im,phase_rad")?;
    for (k, c) in weights.iter().enumerate() {
        writeln!(w, "{k},{:.17e},{:.17e},{:.17e}", c.re, c.im, c.arg())?;
    }
    w.flush()?;
    Ok(())
}

/// Read weights written by [`write_weights`].
pub fn read_weights(path: &Path) -> Result<Vec<Complex64>> {
    let r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        if lineno == 0 {
            if !line.starts_with("antenna,") {
                return Err(Error::Format(format!("weights CSV: unexpected header '{line}'")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 3 {
            return Err(Error::Format(format!(
                "weights CSV line {}: expected at least 3 fields, got {}",
                lineno + 1,
                fields.len()
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.trim()
                .parse()
                .map_err(|_| Error::Format(format!("weights CSV line {}: bad float '{s}'", lineno + 1)))
        };
        out.push(Complex64::new(parse(fields[1])?, parse(fields[2])?));
    }
    if out.is_empty() {
        return Err(Error::Format("weights CSV holds no antenna rows".into()));
    }
    Ok(out)
}

/// Write a channel matrix: one row per (antenna, objective) pair.
pub fn write_channel(path: &Path, entries: &[Vec<Complex64>]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "antenna,objective,re,im,magnitude,phase_rad")?;
    for (k, row) in entries.iter().enumerate() {
        for (m, c) in row.iter().enumerate() {
            writeln!(
                w,
                "{k},{m},{:.17e},{:.17e},{:.17e},{:.17e}",
                c.re,
                c.im,
                c.norm(),
                c.arg()
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Write a scalar plane as a dense matrix, one CSV row per grid row (row 0
/// is the southernmost).
pub fn write_matrix(path: &Path, plane: &ndarray::Array2<f64>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for row in plane.rows() {
        let mut first = true;
        for v in row {
            if !first {
                write!(w, ",")?;
            }
            write!(w, "{v:.17e}")?;
            first = false;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Write an (x, y) series with custom column names.
pub fn write_series(path: &Path, header: (&str, &str), rows: &[(f64, f64)]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{},{}", header.0, header.1)?;
    for (x, y) in rows {
        writeln!(w, "{x:.17e},{y:.17e}")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn weights_round_trip_bit_exact() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("w.csv");
        let weights: Vec<Complex64> = (0..16)
            .map(|k| Complex64::from_polar(1.0, 0.37 * k as f64 - 2.0))
            .collect();
        write_weights(&path, &weights).unwrap();
        let back = read_weights(&path).unwrap();
        assert_eq!(weights, back, "17-digit formatting must round-trip doubles");
    }

    #[test]
    fn malformed_weights_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("w.csv");
        std::fs::write(&path, "antenna,re,im,phase_rad\n0,1.0,not_a_float,0\n").unwrap();
        assert!(read_weights(&path).is_err());
        std::fs::write(&path, "bogus header\n").unwrap();
        assert!(read_weights(&path).is_err());
    }
}
