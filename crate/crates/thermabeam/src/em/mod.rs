//! Two-dimensional finite-difference time-domain solver for the transverse
//! magnetic polarisation (Ez, Hx, Hy) with single-pole Debye dispersion,
//! static conductivity, and a uniaxial perfectly matched absorbing layer.
//!
//! The update is formulated through the displacement field so the absorbing
//! layer stays matched for any dispersive interior medium:
//!
//! 1. `j w sx Pz = curl(H)` — x-stretched curl accumulator,
//! 2. `j w sy Dz = j w Pz` — y-stretched displacement,
//! 3. `Dz = eps(w) Ez` — recovered through the Debye auxiliary equation,
//!    with the conduction current folded in trapezoidally.
//!
//! Outside the layer both stretches are identity and the chain collapses to
//! the ordinary leapfrog update; the interior fast path below is bitwise
//! identical to the general one there, so the hand-off introduces no seam.
//! Conductive (`sigma_s > 0`) material inside the layer is rejected because
//! the conduction term is not coordinate-stretched.

pub mod pml;
pub mod run;
pub mod source;

pub use pml::{timestep_for, PmlAxes, PmlConfig};
pub use run::{
    heating_potential, run_cw, run_pulse, CwDrive, CwObservation, CwRun, CwRunConfig,
    ProbeRecording, PulseRun, PulseRunConfig, DEFAULT_MAX_PULSE_STEPS,
};
pub use source::{raised_cosine_ramp, single_bin_dft, PulseSpec};

use crate::constants::{EPS0, MU0};
use crate::error::{Error, Result};
use crate::grid::{Cell, GridSpec};
use crate::media::MediaMap;
use ndarray::ArrayView2;
use pml::AxisTables;

/// A soft current source: `current` enters the Ampere law as a z-directed
/// current density (A/m^2) at one cell, superposed on the regular update.
#[derive(Clone, Copy, Debug)]
pub struct Drive {
    pub cell: Cell,
    pub current: f64,
}

/// Full mutable solver state for one grid.
pub struct FieldState {
    grid: GridSpec,
    dt: f64,
    step_index: usize,
    // field arrays, row-major `[j * nx + i]`
    ez: Vec<f64>,
    dz: Vec<f64>,
    pz: Vec<f64>,
    pd: Vec<f64>,
    hx: Vec<f64>,
    hy: Vec<f64>,
    bx: Vec<f64>,
    by: Vec<f64>,
    // per-cell dispersion coefficients
    kp: Vec<f64>,
    bp: Vec<f64>,
    cen: Vec<f64>,
    sigd: Vec<f64>,
    invd: Vec<f64>,
    tx: AxisTables,
    ty: AxisTables,
    inv_dx: f64,
    inv_dy: f64,
}

impl FieldState {
    /// Build a solver for `media`, with the timestep locked to an integer
    /// number of samples per `carrier_hz` period.
    pub fn new(media: &MediaMap, carrier_hz: f64, cfg: &PmlConfig) -> Result<FieldState> {
        let grid = *media.grid();
        let (dt, _) = timestep_for(&grid, carrier_hz);
        let n_bg = media.immersion_debye().refractive_index(carrier_hz).re;
        let tx = AxisTables::build(
            grid.nx,
            grid.pml_thickness,
            grid.dx,
            dt,
            cfg,
            cfg.axes.x,
            n_bg,
        );
        let ty = AxisTables::build(
            grid.ny,
            grid.pml_thickness,
            grid.dy,
            dt,
            cfg,
            cfg.axes.y,
            n_bg,
        );
        let n = grid.n_cells();
        let mut st = FieldState {
            grid,
            dt,
            step_index: 0,
            ez: vec![0.0; n],
            dz: vec![0.0; n],
            pz: vec![0.0; n],
            pd: vec![0.0; n],
            hx: vec![0.0; n],
            hy: vec![0.0; n],
            bx: vec![0.0; n],
            by: vec![0.0; n],
            kp: vec![0.0; n],
            bp: vec![0.0; n],
            cen: vec![0.0; n],
            sigd: vec![0.0; n],
            invd: vec![0.0; n],
            tx,
            ty,
            inv_dx: 1.0 / grid.dx,
            inv_dy: 1.0 / grid.dy,
        };
        let immersion = media.immersion();
        if media.immersion_debye().sigma_s > 0.0 {
            return Err(Error::Geometry(format!(
                "immersion medium {} is conductive; the absorbing layer cannot match it",
                immersion.name()
            )));
        }
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let ij = j * grid.nx + i;
                let d = &media.debye_raw()[ij];
                if grid.in_pml(Cell::new(i, j)) {
                    if media.tissue_raw()[ij] != immersion {
                        return Err(Error::Geometry(format!(
                            "cell ({i}, {j}) places {} inside the absorbing layer; \
                             material must stay clear of the outer {} cells",
                            media.tissue_raw()[ij].name(),
                            grid.pml_thickness
                        )));
                    }
                }
                let kp = (2.0 * d.tau - dt) / (2.0 * d.tau + dt);
                let bp = EPS0 * d.delta_eps * dt / (2.0 * d.tau + dt);
                let sigd = d.sigma_s * dt / 2.0;
                let cen = bp + sigd;
                st.kp[ij] = kp;
                st.bp[ij] = bp;
                st.sigd[ij] = sigd;
                st.cen[ij] = cen;
                st.invd[ij] = 1.0 / (EPS0 * d.eps_inf + cen);
            }
        }
        Ok(st)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn step_index(&self) -> usize {
        self.step_index
    }

    /// Elapsed simulated time at which the *next* E update takes effect.
    pub fn drive_time(&self) -> f64 {
        (self.step_index as f64 + 0.5) * self.dt
    }

    pub fn ez_at(&self, cell: Cell) -> f64 {
        self.ez[self.grid.idx(cell)]
    }

    pub fn ez_plane(&self) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((self.grid.ny, self.grid.nx), &self.ez)
            .expect("field length always matches the grid")
    }

    pub fn max_abs_ez(&self) -> f64 {
        self.ez.iter().fold(0.0, |m, &v| m.max(v.abs()))
    }

    /// True if `cell` lies where both coordinate stretches are identity.
    pub fn in_stretch_free_region(&self, cell: Cell) -> bool {
        cell.i >= self.tx.interior.0
            && cell.i < self.tx.interior.1
            && cell.j >= self.ty.interior.0
            && cell.j < self.ty.interior.1
    }

    /// Electromagnetic energy over the stretch-free interior, in J/m (per
    /// unit length along z). Exact for dispersion-free media; a diagnostic
    /// lower bound otherwise.
    pub fn field_energy(&self, media: &MediaMap) -> f64 {
        let nx = self.grid.nx;
        let (x0, x1) = self.tx.interior;
        let (y0, y1) = self.ty.interior;
        let mut acc = 0.0;
        for j in y0..y1 {
            for i in x0..x1 {
                let ij = j * nx + i;
                let e = self.ez[ij];
                let eps = EPS0 * media.debye_raw()[ij].eps_inf;
                acc += 0.5 * eps * e * e
                    + 0.5 * MU0 * (self.hx[ij] * self.hx[ij] + self.hy[ij] * self.hy[ij]);
            }
        }
        acc * self.grid.dx * self.grid.dy
    }

    /// Error unless every field value is finite and bounded.
    pub fn check_finite(&self) -> Result<()> {
        let mut max = 0.0_f64;
        for &v in &self.ez {
            if !v.is_finite() {
                return Err(Error::Instability {
                    step: self.step_index,
                    detail: "non-finite Ez value".into(),
                });
            }
            max = max.max(v.abs());
        }
        if max > 1e30 {
            return Err(Error::Instability {
                step: self.step_index,
                detail: format!("|Ez| grew to {max:.3e}"),
            });
        }
        Ok(())
    }

    /// Advance one timestep: H half-step from the current E, then E from the
    /// new H, with `drives` superposed as soft current sources.
    pub fn step(&mut self, drives: &[Drive]) -> Result<()> {
        self.update_h();
        // Drive cells are re-derived from pre-update state after the bulk
        // pass, so the sparse source costs nothing in the inner loops.
        let mut snaps: Vec<(usize, f64, f64, f64, f64)> = Vec::with_capacity(drives.len());
        for d in drives {
            let ij = self.grid.idx(d.cell);
            if let Some(s) = snaps.iter_mut().find(|s| s.0 == ij) {
                s.4 += d.current;
            } else {
                snaps.push((ij, self.ez[ij], self.dz[ij], self.pd[ij], d.current));
            }
        }
        self.update_e();
        let nx = self.grid.nx;
        for &(ij, e_old, dz_old, pd_old, current) in &snaps {
            let curl = (self.hy[ij] - self.hy[ij - 1]) * self.inv_dx
                - (self.hx[ij] - self.hx[ij - nx]) * self.inv_dy;
            let rhs = curl - current;
            let e_new = (dz_old + self.dt * rhs - self.kp[ij] * pd_old - self.cen[ij] * e_old)
                * self.invd[ij];
            self.dz[ij] = dz_old + self.dt * rhs - self.sigd[ij] * (e_old + e_new);
            self.pd[ij] = self.kp[ij] * pd_old + self.bp[ij] * (e_new + e_old);
            self.ez[ij] = e_new;
        }
        self.step_index += 1;
        if self.step_index % 256 == 0 {
            self.check_finite()?;
        }
        Ok(())
    }

    fn update_h(&mut self) {
        let FieldState {
            grid,
            ez,
            hx,
            hy,
            bx,
            by,
            tx,
            ty,
            inv_dx,
            inv_dy,
            dt,
            ..
        } = self;
        let nx = grid.nx;
        let ny = grid.ny;
        let c_hx = *dt / MU0 * *inv_dy;
        let c_hy = *dt / MU0 * *inv_dx;
        // Hx at (i, j + 1/2): divide by sy (edge), recover through sx (node)
        let (jx0, jx1) = ty.interior_edge;
        let (ix0, ix1) = tx.interior;
        for j in 0..ny - 1 {
            let row = j * nx;
            if j >= jx0 && j < jx1 {
                hx_general(ez, hx, bx, row, nx, 0, ix0, ty, tx, j, *inv_dy);
                let w = ix1 - ix0;
                let ez0 = &ez[row + ix0..row + ix1];
                let ez1 = &ez[row + nx + ix0..row + nx + ix1];
                let hxr = &mut hx[row + ix0..row + ix1];
                for k in 0..w {
                    hxr[k] -= c_hx * (ez1[k] - ez0[k]);
                }
                hx_general(ez, hx, bx, row, nx, ix1, nx, ty, tx, j, *inv_dy);
            } else {
                hx_general(ez, hx, bx, row, nx, 0, nx, ty, tx, j, *inv_dy);
            }
        }
        // Hy at (i + 1/2, j): divide by sx (edge), recover through sy (node)
        let (iy0, iy1) = tx.interior_edge;
        let (jy0, jy1) = ty.interior;
        for j in 0..ny {
            let row = j * nx;
            if j >= jy0 && j < jy1 {
                hy_general(ez, hy, by, row, 0, iy0, tx, ty, j, *inv_dx);
                let w = iy1 - iy0;
                let ez0 = &ez[row + iy0..row + iy1];
                let ez1 = &ez[row + iy0 + 1..row + iy1 + 1];
                let hyr = &mut hy[row + iy0..row + iy1];
                for k in 0..w {
                    hyr[k] += c_hy * (ez1[k] - ez0[k]);
                }
                hy_general(ez, hy, by, row, iy1, nx - 1, tx, ty, j, *inv_dx);
            } else {
                hy_general(ez, hy, by, row, 0, nx - 1, tx, ty, j, *inv_dx);
            }
        }
    }

    fn update_e(&mut self) {
        let FieldState {
            grid,
            ez,
            dz,
            pz,
            pd,
            hx,
            hy,
            kp,
            bp,
            cen,
            sigd,
            invd,
            tx,
            ty,
            inv_dx,
            inv_dy,
            dt,
            ..
        } = self;
        let nx = grid.nx;
        let ny = grid.ny;
        let (x0, x1) = tx.interior;
        let (y0, y1) = ty.interior;
        for j in 1..ny - 1 {
            let row = j * nx;
            if j >= y0 && j < y1 {
                e_general(
                    ez, dz, pz, pd, hx, hy, kp, bp, cen, invd, row, nx, 1, x0, tx, ty, j, *inv_dx,
                    *inv_dy,
                );
                // fast span: identity stretch, conduction folded in
                let w = x1 - x0;
                let base = row + x0;
                let ez_r = &mut ez[base..base + w];
                let dz_r = &mut dz[base..base + w];
                let pd_r = &mut pd[base..base + w];
                let hx_r = &hx[base..base + w];
                let hx_d = &hx[base - nx..base - nx + w];
                let hy_r = &hy[base..base + w];
                let hy_l = &hy[base - 1..base - 1 + w];
                let kp_r = &kp[base..base + w];
                let bp_r = &bp[base..base + w];
                let cen_r = &cen[base..base + w];
                let sig_r = &sigd[base..base + w];
                let inv_r = &invd[base..base + w];
                for k in 0..w {
                    let curl =
                        (hy_r[k] - hy_l[k]) * *inv_dx - (hx_r[k] - hx_d[k]) * *inv_dy;
                    let e_old = ez_r[k];
                    let pd_old = pd_r[k];
                    let e_new = (dz_r[k] + *dt * curl - kp_r[k] * pd_old - cen_r[k] * e_old)
                        * inv_r[k];
                    dz_r[k] += *dt * curl - sig_r[k] * (e_old + e_new);
                    pd_r[k] = kp_r[k] * pd_old + bp_r[k] * (e_new + e_old);
                    ez_r[k] = e_new;
                }
                e_general(
                    ez, dz, pz, pd, hx, hy, kp, bp, cen, invd, row, nx, x1, nx - 1, tx, ty, j,
                    *inv_dx, *inv_dy,
                );
            } else {
                e_general(
                    ez, dz, pz, pd, hx, hy, kp, bp, cen, invd, row, nx, 1, nx - 1, tx, ty, j,
                    *inv_dx, *inv_dy,
                );
            }
        }
    }
}

/// Hx update through the stretched chain, for columns `[i0, i1)` of row `j`.
#[allow(clippy::too_many_arguments)]
#[inline]
fn hx_general(
    ez: &[f64],
    hx: &mut [f64],
    bx: &mut [f64],
    row: usize,
    nx: usize,
    i0: usize,
    i1: usize,
    ty: &AxisTables,
    tx: &AxisTables,
    j: usize,
    inv_dy: f64,
) {
    let eay = ty.edge_a[j];
    let eby = ty.edge_b[j];
    for i in i0..i1 {
        let ij = row + i;
        let dez = (ez[ij + nx] - ez[ij]) * inv_dy;
        let b_old = bx[ij];
        let b_new = eay * b_old - eby * dez;
        bx[ij] = b_new;
        hx[ij] += tx.rec_k[i] * (b_new - b_old) + tx.rec_s[i] * (b_new + b_old);
    }
}

/// Hy update through the stretched chain, for columns `[i0, i1)` of row `j`.
#[allow(clippy::too_many_arguments)]
#[inline]
fn hy_general(
    ez: &[f64],
    hy: &mut [f64],
    by: &mut [f64],
    row: usize,
    i0: usize,
    i1: usize,
    tx: &AxisTables,
    ty: &AxisTables,
    j: usize,
    inv_dx: f64,
) {
    let rk = ty.rec_k[j];
    let rs = ty.rec_s[j];
    for i in i0..i1 {
        let ij = row + i;
        let dex = (ez[ij + 1] - ez[ij]) * inv_dx;
        let b_old = by[ij];
        let b_new = tx.edge_a[i] * b_old + tx.edge_b[i] * dex;
        by[ij] = b_new;
        hy[ij] += rk * (b_new - b_old) + rs * (b_new + b_old);
    }
}

/// E update through the stretched chain, for columns `[i0, i1)` of row `j`.
/// Only runs over absorbing-layer cells, where conduction is guaranteed zero.
#[allow(clippy::too_many_arguments)]
#[inline]
fn e_general(
    ez: &mut [f64],
    dz: &mut [f64],
    pz: &mut [f64],
    pd: &mut [f64],
    hx: &[f64],
    hy: &[f64],
    kp: &[f64],
    bp: &[f64],
    cen: &[f64],
    invd: &[f64],
    row: usize,
    nx: usize,
    i0: usize,
    i1: usize,
    tx: &AxisTables,
    ty: &AxisTables,
    j: usize,
    inv_dx: f64,
    inv_dy: f64,
) {
    let nay = ty.node_a[j];
    let ncy = ty.node_c[j];
    for i in i0..i1 {
        let ij = row + i;
        let curl = (hy[ij] - hy[ij - 1]) * inv_dx - (hx[ij] - hx[ij - nx]) * inv_dy;
        let pz_old = pz[ij];
        let pz_new = tx.node_a[i] * pz_old + tx.node_b[i] * curl;
        pz[ij] = pz_new;
        let dz_new = nay * dz[ij] + ncy * (pz_new - pz_old);
        dz[ij] = dz_new;
        let e_old = ez[ij];
        let pd_old = pd[ij];
        let e_new = (dz_new - kp[ij] * pd_old - cen[ij] * e_old) * invd[ij];
        ez[ij] = e_new;
        pd[ij] = kp[ij] * pd_old + bp[ij] * (e_new + e_old);
    }
}
