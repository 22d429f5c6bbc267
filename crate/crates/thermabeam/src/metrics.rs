//! Performance metrics over heating-potential and temperature maps: region
//! power integrals with baseline-normalized ratios, contour masks, axis
//! profiles, and focus-placement error.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Cell, GridSpec};
use crate::media::MediaMap;
use crate::phantom::DEFAULT_TREATMENT_RADIUS;

/// Region power integrals of a heating-potential map. The 2D solver's Q is a
/// volumetric density (W/m^3); integrating over cell areas yields W/m of
/// axial length, the natural power measure of a cylindrical model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerReport {
    /// Integral of Q over every tissue cell, W/m.
    pub total_media: f64,
    /// Integral of Q over tissue within 1 cm of the target, W/m.
    pub treatment_region: f64,
    /// Q at the target cell, W/m^3.
    pub target_cell: f64,
    /// Ratios against a baseline report; present only where the baseline
    /// value is positive.
    pub total_ratio: Option<f64>,
    pub treatment_ratio: Option<f64>,
    pub target_ratio: Option<f64>,
}

fn check_map(map: &Array2<f64>, grid: &GridSpec, what: &str) -> Result<()> {
    if map.dim() != (grid.ny, grid.nx) {
        return Err(Error::Config(format!(
            "{what} has shape {:?}, the grid needs ({}, {})",
            map.dim(),
            grid.ny,
            grid.nx
        )));
    }
    if let Some(v) = map.iter().find(|v| !v.is_finite()) {
        return Err(Error::Config(format!("{what} holds a non-finite value {v}")));
    }
    Ok(())
}

/// Integrate a heating-potential map over the tissue, the 1 cm treatment
/// disk around `target`, and the target cell itself; normalize against
/// `baseline` when given.
pub fn power_report(
    q: &Array2<f64>,
    media: &MediaMap,
    target: Cell,
    baseline: Option<&PowerReport>,
) -> Result<PowerReport> {
    let grid = media.grid();
    check_map(q, grid, "heating potential")?;
    if q.iter().any(|&v| v < 0.0) {
        return Err(Error::Config(
            "heating potential holds negative cells".into(),
        ));
    }
    if !grid.contains(target) {
        return Err(Error::Config(format!(
            "target cell ({}, {}) outside the {}x{} grid",
            target.i, target.j, grid.nx, grid.ny
        )));
    }
    let cell_area = grid.dx * grid.dy;
    let (tx, ty) = grid.cell_center(target);
    let r2 = DEFAULT_TREATMENT_RADIUS * DEFAULT_TREATMENT_RADIUS;
    let mut total = 0.0;
    let mut treatment = 0.0;
    for c in media.tissue_cells() {
        let v = q[(c.j, c.i)];
        total += v;
        let (x, y) = grid.cell_center(c);
        let (dx, dy) = (x - tx, y - ty);
        if dx * dx + dy * dy <= r2 {
            treatment += v;
        }
    }
    total *= cell_area;
    treatment *= cell_area;
    let target_cell = q[(target.j, target.i)];
    let ratio = |v: f64, b: f64| (b > 0.0).then(|| v / b);
    Ok(PowerReport {
        total_media: total,
        treatment_region: treatment,
        target_cell,
        total_ratio: baseline.and_then(|b| ratio(total, b.total_media)),
        treatment_ratio: baseline.and_then(|b| ratio(treatment, b.treatment_region)),
        target_ratio: baseline.and_then(|b| ratio(target_cell, b.target_cell)),
    })
}

/// Threshold defining a contour region.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Level {
    /// Cells within the given number of decibels of the map peak, treating
    /// map values as powers (3.0 keeps cells above half the peak).
    DbBelowPeak(f64),
    /// Cells at or above an absolute value (e.g. a temperature in degC).
    Absolute(f64),
}

/// Boolean mask of cells at or above the level.
pub fn contour_mask(map: &Array2<f64>, level: Level) -> Result<Array2<bool>> {
    if map.is_empty() {
        return Err(Error::Config("cannot contour an empty map".into()));
    }
    if let Some(v) = map.iter().find(|v| !v.is_finite()) {
        return Err(Error::Config(format!("map holds a non-finite value {v}")));
    }
    let threshold = match level {
        Level::DbBelowPeak(db) => {
            if db < 0.0 {
                return Err(Error::Config(format!(
                    "contour level must be a non-negative attenuation, got {db} dB"
                )));
            }
            let peak = map.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if !(peak > 0.0) {
                return Err(Error::Config(format!(
                    "decibel contour needs a positive peak, map maximum is {peak}"
                )));
            }
            peak * 10f64.powf(-db / 10.0)
        }
        Level::Absolute(v) => v,
    };
    Ok(map.mapv(|v| v >= threshold))
}

/// Area covered by a mask, m^2.
pub fn mask_area(mask: &Array2<bool>, grid: &GridSpec) -> Result<f64> {
    if mask.dim() != (grid.ny, grid.nx) {
        return Err(Error::Config(format!(
            "mask shape {:?} does not match the ({}, {}) grid",
            mask.dim(),
            grid.ny,
            grid.nx
        )));
    }
    Ok(mask.iter().filter(|&&m| m).count() as f64 * grid.dx * grid.dy)
}

/// The row of the map whose cell centres lie nearest y = 0, west to east.
pub fn slice_1d(map: &Array2<f64>, grid: &GridSpec) -> Result<Vec<f64>> {
    check_map(map, grid, "map")?;
    let row = grid
        .cell_at(0.0, 0.0)
        .ok_or_else(|| Error::Config("grid does not contain y = 0".into()))?
        .j;
    Ok((0..grid.nx).map(|i| map[(row, i)]).collect())
}

/// Where a heating-potential map actually peaks, relative to where it was
/// meant to.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FocusReport {
    /// Tissue cell holding the maximum.
    pub peak: Cell,
    /// Euclidean distance from the intended target, in cells.
    pub distance_cells: f64,
    /// How many tissue cells share the exact maximum value. Ties are
    /// resolved toward the target, then by row-major order.
    pub tied_cells: usize,
}

/// Distance, in cells, between the in-tissue argmax of `q` and the intended
/// target.
pub fn focus_error(q: &Array2<f64>, media: &MediaMap, target: Cell) -> Result<FocusReport> {
    let grid = media.grid();
    check_map(q, grid, "heating potential")?;
    if !grid.contains(target) {
        return Err(Error::Config(format!(
            "target cell ({}, {}) outside the {}x{} grid",
            target.i, target.j, grid.nx, grid.ny
        )));
    }
    let mut max = f64::NEG_INFINITY;
    let mut tied: Vec<Cell> = Vec::new();
    for c in media.tissue_cells() {
        let v = q[(c.j, c.i)];
        if v > max {
            max = v;
            tied.clear();
            tied.push(c);
        } else if v == max {
            tied.push(c);
        }
    }
    if tied.is_empty() {
        return Err(Error::InsufficientData(
            "no tissue cells to locate a peak in".into(),
        ));
    }
    let dist2 = |c: Cell| {
        let di = c.i as f64 - target.i as f64;
        let dj = c.j as f64 - target.j as f64;
        di * di + dj * dj
    };
    // tissue_cells iterates row-major, so the first minimum is also the
    // row-major-first among equidistant candidates.
    let peak = *tied
        .iter()
        .min_by(|a, b| dist2(**a).total_cmp(&dist2(**b)))
        .expect("non-empty candidate list");
    Ok(FocusReport {
        peak,
        distance_cells: dist2(peak).sqrt(),
        tied_cells: tied.len(),
    })
}
