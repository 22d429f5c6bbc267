//! Quick-look raster previews as binary PPM (P6).
//!
//! The heat colormap ramps black -> blue -> red -> yellow -> white; values are
//! normalised to the plane's own min/max unless an explicit range is given.
//! Previews are diagnostics only — quantitative data lives in HFGM and CSV.

use crate::error::Result;
use ndarray::Array2;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

fn heat_rgb(t: f64) -> [u8; 3] {
    // four linear segments through (0,0,0) (0,0,1) (1,0,0) (1,1,0) (1,1,1)
    let t = t.clamp(0.0, 1.0);
    let lerp = |a: f64, b: f64, x: f64| a + (b - a) * x;
    let (r, g, b) = if t < 0.25 {
        (0.0, 0.0, lerp(0.0, 1.0, t / 0.25))
    } else if t < 0.5 {
        let x = (t - 0.25) / 0.25;
        (lerp(0.0, 1.0, x), 0.0, lerp(1.0, 0.0, x))
    } else if t < 0.75 {
        let x = (t - 0.5) / 0.25;
        (1.0, lerp(0.0, 1.0, x), 0.0)
    } else {
        let x = (t - 0.75) / 0.25;
        (1.0, 1.0, lerp(0.0, 1.0, x))
    };
    [(r * 255.0) as u8, (g * 255.0) as u8, (b * 255.0) as u8]
}

/// Write a false-colour preview of a scalar plane. `range` overrides the
/// normalisation interval; rows are flipped so +y points up in the image.
pub fn write_heatmap(path: &Path, plane: &Array2<f64>, range: Option<(f64, f64)>) -> Result<()> {
    let (ny, nx) = plane.dim();
    let (lo, hi) = range.unwrap_or_else(|| {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in plane.iter() {
            if v.is_finite() {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        if !(hi > lo) {
            (0.0, 1.0)
        } else {
            (lo, hi)
        }
    });
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "P6\n{nx} {ny}\n255\n")?;
    for j in (0..ny).rev() {
        for i in 0..nx {
            let t = (plane[[j, i]] - lo) / span;
            w.write_all(&heat_rgb(t))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Write a black/white mask preview.
pub fn write_mask(path: &Path, mask: &Array2<bool>) -> Result<()> {
    let (ny, nx) = mask.dim();
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "P6\n{nx} {ny}\n255\n")?;
    for j in (0..ny).rev() {
        for i in 0..nx {
            let v = if mask[[j, i]] { 255 } else { 0 };
            w.write_all(&[v, v, v])?;
        }
    }
    w.flush()?;
    Ok(())
}
