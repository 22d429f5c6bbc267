//! Per-cell material description of a simulation domain.
//!
//! A [`MediaMap`] couples a [`GridSpec`] with one tissue label and one set of
//! Debye parameters per cell, plus the immersion-bath description (which
//! medium surrounds the tissue, its film coefficient and temperature).
//! Thermal parameters ride on the tissue label.
//!
//! Cells whose label equals the immersion medium are "bath" cells: the
//! thermal solver holds them at the ambient temperature, and phantom builders
//! fill the domain with them before painting tissue.

use crate::error::{Error, Result};
use crate::grid::{Cell, GridSpec};
use crate::tissue::{DebyeParams, ThermalParams, Tissue};
use ndarray::Array2;

#[derive(Clone, Debug, PartialEq)]
pub struct MediaMap {
    grid: GridSpec,
    tissue: Vec<Tissue>,
    debye: Vec<DebyeParams>,
    immersion: Tissue,
    /// Dielectric description of the immersion medium itself (usually the
    /// label's defaults, but custom for analytic uniform domains).
    immersion_debye: DebyeParams,
    /// Convective film coefficient at tissue-bath faces, W/m^2/degC.
    pub boundary_h: f64,
    /// Bath temperature, degC.
    pub ambient_temp: f64,
}

impl MediaMap {
    /// Domain filled entirely with the immersion medium.
    pub fn immersed(grid: GridSpec, immersion: Tissue) -> Result<Self> {
        grid.validate()?;
        if !matches!(immersion, Tissue::Water | Tissue::Air) {
            return Err(Error::Config(format!(
                "immersion medium must be water or air, got {}",
                immersion.name()
            )));
        }
        let n = grid.n_cells();
        Ok(MediaMap {
            grid,
            tissue: vec![immersion; n],
            debye: vec![immersion.debye(); n],
            immersion,
            immersion_debye: immersion.debye(),
            boundary_h: immersion.default_boundary_h(),
            ambient_temp: immersion.default_ambient(),
        })
    }

    /// Domain filled entirely with one tissue (no bath cells); handy for
    /// closed-form solver checks. The nominal immersion label is air.
    pub fn uniform_tissue(grid: GridSpec, tissue: Tissue) -> Result<Self> {
        if matches!(tissue, Tissue::Water | Tissue::Air) {
            return Err(Error::Config("uniform tissue domain needs a tissue label".into()));
        }
        let mut m = Self::immersed(grid, Tissue::Air)?;
        let n = grid.n_cells();
        m.tissue = vec![tissue; n];
        m.debye = vec![tissue.debye(); n];
        Ok(m)
    }

    /// Domain filled everywhere (absorbing layer included) with one custom
    /// medium, for analytic validation runs such as wave-speed checks. The
    /// electromagnetic solver additionally requires `sigma_s == 0` so its
    /// absorbing layer stays matched.
    pub fn uniform_medium(grid: GridSpec, debye: DebyeParams) -> Result<Self> {
        grid.validate()?;
        debye.validate()?;
        let n = grid.n_cells();
        Ok(MediaMap {
            grid,
            tissue: vec![Tissue::Custom; n],
            debye: vec![debye; n],
            immersion: Tissue::Custom,
            immersion_debye: debye,
            boundary_h: Tissue::Custom.default_boundary_h(),
            ambient_temp: Tissue::Custom.default_ambient(),
        })
    }

    /// Rebuild from raw per-cell data (deserialization path). The immersion
    /// dielectric is recovered from the first immersion-labelled cell, or the
    /// label's defaults if no such cell exists.
    pub(crate) fn from_raw(
        grid: GridSpec,
        immersion: Tissue,
        tissue: Vec<Tissue>,
        debye: Vec<DebyeParams>,
        boundary_h: f64,
        ambient_temp: f64,
    ) -> Result<Self> {
        grid.validate()?;
        if tissue.len() != grid.n_cells() || debye.len() != grid.n_cells() {
            return Err(Error::Config(format!(
                "cell arrays ({}, {}) do not match the {} cells of the grid",
                tissue.len(),
                debye.len(),
                grid.n_cells()
            )));
        }
        let immersion_debye = tissue
            .iter()
            .position(|&t| t == immersion)
            .map(|k| debye[k])
            .unwrap_or_else(|| immersion.debye());
        Ok(MediaMap {
            grid,
            tissue,
            debye,
            immersion,
            immersion_debye,
            boundary_h,
            ambient_temp,
        })
    }

    /// Dielectric parameters of the immersion medium.
    pub fn immersion_debye(&self) -> DebyeParams {
        self.immersion_debye
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn immersion(&self) -> Tissue {
        self.immersion
    }

    #[inline]
    pub fn tissue_at(&self, c: Cell) -> Tissue {
        self.tissue[self.grid.idx(c)]
    }

    #[inline]
    pub fn debye_at(&self, c: Cell) -> DebyeParams {
        self.debye[self.grid.idx(c)]
    }

    #[inline]
    pub fn thermal_at(&self, c: Cell) -> ThermalParams {
        self.tissue_at(c).thermal()
    }

    /// True for cells that are tissue rather than bath.
    #[inline]
    pub fn is_tissue(&self, c: Cell) -> bool {
        self.tissue_at(c) != self.immersion
    }

    /// Paint a disk of tissue (by centre/radius in metres) with its default
    /// Debye parameters. Cells whose centre lies within `radius` are claimed.
    pub fn paint_disk(&mut self, center: (f64, f64), radius: f64, tissue: Tissue) -> Result<()> {
        self.paint_disk_with(center, radius, tissue, tissue.debye())
    }

    /// Paint a disk with explicit Debye parameters.
    pub fn paint_disk_with(
        &mut self,
        center: (f64, f64),
        radius: f64,
        tissue: Tissue,
        debye: DebyeParams,
    ) -> Result<()> {
        if !(radius > 0.0) {
            return Err(Error::Geometry(format!("disk radius must be positive, got {radius}")));
        }
        let half_w = 0.5 * self.grid.width();
        let half_h = 0.5 * self.grid.height();
        if center.0.abs() + radius > half_w || center.1.abs() + radius > half_h {
            return Err(Error::Geometry(format!(
                "disk at ({}, {}) r={} spills outside the {:.3} x {:.3} m domain",
                center.0,
                center.1,
                radius,
                self.grid.width(),
                self.grid.height()
            )));
        }
        debye.validate()?;
        let r2 = radius * radius;
        let nx = self.grid.nx;
        for at in 0..self.grid.n_cells() {
            let c = Cell::new(at % nx, at / nx);
            let (x, y) = self.grid.cell_center(c);
            let (dx, dy) = (x - center.0, y - center.1);
            if dx * dx + dy * dy <= r2 {
                self.tissue[at] = tissue;
                self.debye[at] = debye;
            }
        }
        Ok(())
    }

    /// Replace the Debye parameters of one cell, keeping its label.
    pub fn set_debye(&mut self, c: Cell, debye: DebyeParams) -> Result<()> {
        debye.validate()?;
        let at = self.grid.idx(c);
        self.debye[at] = debye;
        Ok(())
    }

    pub fn set_cell(&mut self, c: Cell, tissue: Tissue, debye: DebyeParams) -> Result<()> {
        debye.validate()?;
        let at = self.grid.idx(c);
        self.tissue[at] = tissue;
        self.debye[at] = debye;
        Ok(())
    }

    /// Iterator over all cells in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        let nx = self.grid.nx;
        (0..self.grid.n_cells()).map(move |k| Cell::new(k % nx, k / nx))
    }

    /// Iterator over tissue (non-bath) cells.
    pub fn tissue_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.cells().filter(move |&c| self.is_tissue(c))
    }

    pub fn count_tissue(&self) -> usize {
        self.tissue.iter().filter(|&&t| t != self.immersion).count()
    }

    /// Fraction of tissue cells carrying `label` (0 if there is no tissue).
    pub fn tissue_fraction(&self, label: Tissue) -> f64 {
        let total = self.count_tissue();
        if total == 0 {
            return 0.0;
        }
        let hits = self
            .tissue
            .iter()
            .filter(|&&t| t != self.immersion && t == label)
            .count();
        hits as f64 / total as f64
    }

    /// Boolean tissue mask, shape (ny, nx).
    pub fn tissue_mask(&self) -> Array2<bool> {
        Array2::from_shape_fn((self.grid.ny, self.grid.nx), |(j, i)| {
            self.is_tissue(Cell::new(i, j))
        })
    }

    pub(crate) fn debye_raw(&self) -> &[DebyeParams] {
        &self.debye
    }

    pub(crate) fn tissue_raw(&self) -> &[Tissue] {
        &self.tissue
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> GridSpec {
        GridSpec::square(101, 1e-3).unwrap()
    }

    #[test]
    fn immersed_map_has_no_tissue() {
        let m = MediaMap::immersed(grid(), Tissue::Water).unwrap();
        assert_eq!(m.count_tissue(), 0);
        assert_eq!(m.boundary_h, 300.0);
        assert_eq!(m.ambient_temp, 15.0);
        assert!(MediaMap::immersed(grid(), Tissue::Fat).is_err(), "fat is not a bath");
    }

    #[test]
    fn painted_disk_matches_area() {
        let mut m = MediaMap::immersed(grid(), Tissue::Water).unwrap();
        m.paint_disk((0.0, 0.0), 0.03, Tissue::Fibroglandular).unwrap();
        let count = m.count_tissue();
        let expected = std::f64::consts::PI * 0.03 * 0.03 / (1e-3 * 1e-3);
        let err = (count as f64 - expected).abs() / expected;
        assert!(err < 0.02, "disk cell count {count} vs continuum {expected:.0}");
        assert!(m.is_tissue(Cell::new(50, 50)));
        assert!(!m.is_tissue(Cell::new(5, 5)));
        assert_eq!(m.tissue_fraction(Tissue::Fibroglandular), 1.0);
    }

    #[test]
    fn disk_outside_domain_is_rejected() {
        let mut m = MediaMap::immersed(grid(), Tissue::Water).unwrap();
        assert!(m.paint_disk((0.04, 0.0), 0.02, Tissue::Fat).is_err());
        assert!(m.paint_disk((0.0, 0.0), -0.01, Tissue::Fat).is_err());
    }

    #[test]
    fn per_cell_overrides_keep_labels() {
        let mut m = MediaMap::immersed(grid(), Tissue::Water).unwrap();
        m.paint_disk((0.0, 0.0), 0.02, Tissue::Fibroglandular).unwrap();
        let c = Cell::new(50, 50);
        let scaled = m.debye_at(c).scaled(0.65).unwrap();
        m.set_debye(c, scaled).unwrap();
        assert_eq!(m.tissue_at(c), Tissue::Fibroglandular);
        assert!((m.debye_at(c).sigma_s - 0.468).abs() < 1e-15);
        // thermal side is label-driven and therefore unchanged
        assert_eq!(m.thermal_at(c).perfusion, 2700.0);
    }

    #[test]
    fn uniform_tissue_domain_is_all_tissue() {
        let m = MediaMap::uniform_tissue(grid(), Tissue::Fibroglandular).unwrap();
        assert_eq!(m.count_tissue(), m.grid().n_cells());
        assert!(MediaMap::uniform_tissue(grid(), Tissue::Water).is_err());
    }
}
