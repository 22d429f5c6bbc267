//! Uniform 2D grid description and cell addressing.
//!
//! The grid is square-celled (`dx == dy`) and centred on the origin: cell
//! `(i, j)` has its centre at `((i + 0.5) dx - w/2, (j + 0.5) dy - h/2)`.
//! `i` runs along x (fastest-varying in storage), `j` along y.

use crate::constants::C0;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Index of one grid cell; `i` is the x (column) index, `j` the y (row) index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub i: usize,
    pub j: usize,
}

impl Cell {
    pub fn new(i: usize, j: usize) -> Self {
        Cell { i, j }
    }

    /// Euclidean distance to another cell, in cell units.
    pub fn distance_cells(self, other: Cell) -> f64 {
        let di = self.i as f64 - other.i as f64;
        let dj = self.j as f64 - other.j as f64;
        (di * di + dj * dj).sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    /// Cell edge, metres. Cells are square.
    pub dx: f64,
    pub dy: f64,
    /// Courant factor S; the electromagnetic timestep is `S dx / (c0 sqrt(2))`.
    pub courant: f64,
    /// Absorbing-layer thickness in cells on every boundary.
    pub pml_thickness: usize,
}

impl GridSpec {
    pub const DEFAULT_COURANT: f64 = 0.7;
    pub const DEFAULT_PML: usize = 10;

    pub fn new(nx: usize, ny: usize, dx: f64, courant: f64, pml_thickness: usize) -> Result<Self> {
        let spec = GridSpec {
            nx,
            ny,
            dx,
            dy: dx,
            courant,
            pml_thickness,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Square grid with default Courant factor and PML thickness.
    pub fn square(n: usize, dx: f64) -> Result<Self> {
        Self::new(n, n, dx, Self::DEFAULT_COURANT, Self::DEFAULT_PML)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dx > 0.0) || !self.dx.is_finite() {
            return Err(Error::Config(format!("cell size must be positive, got {}", self.dx)));
        }
        if self.dy != self.dx {
            return Err(Error::Config("cells must be square (dx == dy)".into()));
        }
        let limit = 1.0 / 2f64.sqrt();
        if !(self.courant > 0.0 && self.courant < limit) {
            return Err(Error::Config(format!(
                "courant factor must lie in (0, 1/sqrt(2)); got {}",
                self.courant
            )));
        }
        if self.pml_thickness < 8 {
            return Err(Error::Config(format!(
                "absorbing layer needs at least 8 cells, got {}",
                self.pml_thickness
            )));
        }
        if self.nx <= 2 * self.pml_thickness + 4 || self.ny <= 2 * self.pml_thickness + 4 {
            return Err(Error::Config(format!(
                "grid {}x{} leaves no interior inside a {}-cell absorbing layer",
                self.nx, self.ny, self.pml_thickness
            )));
        }
        Ok(())
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    /// Physical width (x extent), metres.
    pub fn width(&self) -> f64 {
        self.nx as f64 * self.dx
    }

    /// Physical height (y extent), metres.
    pub fn height(&self) -> f64 {
        self.ny as f64 * self.dy
    }

    /// Raw electromagnetic timestep from the 2D Courant bound, seconds.
    /// Runners shrink it further so a carrier period is an integer number of
    /// steps; see [`crate::em`].
    pub fn dt_raw(&self) -> f64 {
        self.courant * self.dx / (C0 * 2f64.sqrt())
    }

    /// Centre coordinates of a cell, metres, origin at grid centre.
    /// The offset-in-cells is formed before scaling by the pitch so that
    /// mirror-image cells get exactly opposite coordinates; geometry painted
    /// symmetrically about the centre then really is symmetric cell-by-cell.
    pub fn cell_center(&self, c: Cell) -> (f64, f64) {
        (
            (c.i as f64 + 0.5 - 0.5 * self.nx as f64) * self.dx,
            (c.j as f64 + 0.5 - 0.5 * self.ny as f64) * self.dy,
        )
    }

    /// Cell whose centre is nearest to a physical point, or `None` outside the
    /// grid.
    pub fn cell_at(&self, x: f64, y: f64) -> Option<Cell> {
        let fi = x / self.dx + 0.5 * self.nx as f64 - 0.5;
        let fj = y / self.dy + 0.5 * self.ny as f64 - 0.5;
        let i = fi.round();
        let j = fj.round();
        if i < 0.0 || j < 0.0 || i >= self.nx as f64 || j >= self.ny as f64 {
            return None;
        }
        Some(Cell::new(i as usize, j as usize))
    }

    /// Row-major flat index of a cell.
    #[inline]
    pub fn idx(&self, c: Cell) -> usize {
        c.j * self.nx + c.i
    }

    pub fn contains(&self, c: Cell) -> bool {
        c.i < self.nx && c.j < self.ny
    }

    /// True if the cell lies inside the absorbing layer on any side.
    pub fn in_pml(&self, c: Cell) -> bool {
        let t = self.pml_thickness;
        c.i < t || c.j < t || c.i >= self.nx - t || c.j >= self.ny - t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centered_coordinates_round_trip() {
        let g = GridSpec::square(101, 1e-3).unwrap();
        // odd grid: the middle cell sits exactly at the origin
        let mid = Cell::new(50, 50);
        let (x, y) = g.cell_center(mid);
        assert!(x.abs() < 1e-15 && y.abs() < 1e-15, "middle cell at origin, got ({x}, {y})");
        assert_eq!(g.cell_at(x, y), Some(mid));
        // mirror symmetry: centre of (i, j) negates at (nx-1-i, ny-1-j)
        let c = Cell::new(13, 77);
        let m = Cell::new(g.nx - 1 - c.i, g.ny - 1 - c.j);
        let (cx, cy) = g.cell_center(c);
        let (mx, my) = g.cell_center(m);
        assert!((cx + mx).abs() < 1e-15 && (cy + my).abs() < 1e-15);
    }

    #[test]
    fn cell_at_rejects_points_outside() {
        let g = GridSpec::square(101, 1e-3).unwrap();
        assert!(g.cell_at(0.06, 0.0).is_none(), "x beyond the half-width");
        assert!(g.cell_at(0.0, -0.0506).is_none());
        assert!(g.cell_at(0.0502, 0.0).is_some(), "just inside the rim");
    }

    #[test]
    fn validation_rejects_bad_specs() {
        assert!(GridSpec::new(100, 100, 0.0, 0.7, 10).is_err(), "zero cell size");
        assert!(GridSpec::new(100, 100, 1e-3, 0.8, 10).is_err(), "courant above 2D bound");
        assert!(GridSpec::new(100, 100, 1e-3, 0.7, 4).is_err(), "absorber too thin");
        assert!(GridSpec::new(20, 100, 1e-3, 0.7, 10).is_err(), "no interior left");
        assert!(GridSpec::new(100, 100, 1e-3, 0.7, 10).is_ok());
    }

    #[test]
    fn timestep_matches_courant_bound() {
        let g = GridSpec::square(400, 0.5e-3).unwrap();
        // 0.7 * 0.5mm / (c0 sqrt(2)), high-precision reference value
        assert!((g.dt_raw() - 8.255_290_178_62e-13).abs() < 1e-22);
    }

    #[test]
    fn pml_membership() {
        let g = GridSpec::square(100, 1e-3).unwrap();
        assert!(g.in_pml(Cell::new(0, 50)));
        assert!(g.in_pml(Cell::new(50, 9)));
        assert!(!g.in_pml(Cell::new(10, 10)));
        assert!(g.in_pml(Cell::new(90, 50)));
        assert!(!g.in_pml(Cell::new(89, 50)));
    }
}
