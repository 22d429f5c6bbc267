//! Conservative finite-volume bio-heat solver.
//!
//! Integrates the Pennes equation over the tissue cells of a media map,
//!
//! ```text
//! rho Cp dT/dt = div(K grad T) + A0 + scale * Q - B (T - T_blood)
//! ```
//!
//! with `Q` an absorbed-power density plane (W/m^3) usually produced by
//! [`crate::em::heating_potential`] and `scale` a dimensionless applicator
//! drive level. Faces between tissue cells conduct with the harmonic mean of
//! the two conductivities; a face against the immersion bath conducts through
//! the series of half-a-cell of tissue and a convective film with coefficient
//! [`MediaMap::boundary_h`]; faces on the domain edge are insulated. Bath
//! cells are an infinite reservoir pinned at [`MediaMap::ambient_temp`], and
//! power deposited in them is ignored.

use ndarray::Array2;

use crate::constants::BLOOD_TEMP_C;
use crate::error::{Error, Result};
use crate::grid::Cell;
use crate::media::MediaMap;

/// Explicit integration controls.
#[derive(Clone, Copy, Debug)]
pub struct ThermalRunConfig {
    /// Steady-state criterion: largest |dT/dt| over tissue, degC per second.
    pub steady_tol: f64,
    /// Give up (with `steady = false`) after this much simulated time, s.
    pub max_sim_time: f64,
}

impl Default for ThermalRunConfig {
    fn default() -> Self {
        ThermalRunConfig {
            steady_tol: 1e-4,
            max_sim_time: 14_400.0,
        }
    }
}

impl ThermalRunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.steady_tol > 0.0) {
            return Err(Error::Config(format!(
                "steady-state tolerance must be positive, got {}",
                self.steady_tol
            )));
        }
        if !(self.max_sim_time > 0.0) {
            return Err(Error::Config(format!(
                "simulated-time budget must be positive, got {}",
                self.max_sim_time
            )));
        }
        Ok(())
    }
}

/// Result of a thermal integration.
#[derive(Clone, Debug)]
pub struct ThermalRun {
    /// Temperature plane, degC, shape `(ny, nx)`; bath cells hold the bath
    /// temperature.
    pub temp: Array2<f64>,
    /// Simulated time integrated, s.
    pub sim_time: f64,
    /// Explicit steps taken.
    pub steps: usize,
    /// Stable explicit timestep used, s.
    pub dt: f64,
    /// Whether the steady criterion was met before the time budget ran out.
    pub steady: bool,
    /// Largest |dT/dt| over tissue at the final step, degC/s.
    pub final_rate: f64,
}

/// One face of a tissue cell's finite-volume stencil. The coefficient is
/// volumetric (W/m^3/degC) and multiplies the temperature difference across
/// the face.
#[derive(Clone, Copy)]
enum Face {
    /// Domain edge: insulated.
    None,
    /// Conduction to another tissue cell (slot index into the packed arrays).
    Tissue { slot: usize, c: f64 },
    /// Series of half-cell conduction and convective film into the bath.
    Bath { c: f64 },
}

/// Packed per-tissue-cell arrays for the explicit update.
struct Stencil {
    /// Flat grid index of each slot.
    cells: Vec<usize>,
    rcp: Vec<f64>,
    metabolic: Vec<f64>,
    perfusion: Vec<f64>,
    /// Absorbed power density per slot at unit scale, W/m^3.
    power: Vec<f64>,
    faces: Vec<[Face; 4]>,
    /// Stable timestep (0.9 of the positivity bound), s.
    dt: f64,
}

fn build_stencil(media: &MediaMap, power: &Array2<f64>) -> Result<Stencil> {
    let grid = *media.grid();
    if power.dim() != (grid.ny, grid.nx) {
        return Err(Error::Config(format!(
            "power plane shape {:?} does not match the {}x{} grid",
            power.dim(),
            grid.nx,
            grid.ny
        )));
    }
    for ((j, i), &q) in power.indexed_iter() {
        if !q.is_finite() || q < 0.0 {
            return Err(Error::Config(format!(
                "power density at cell ({i}, {j}) is {q}; must be finite and non-negative"
            )));
        }
    }
    if media.count_tissue() == 0 {
        return Err(Error::Geometry(
            "media map holds no tissue cells; nothing to heat".into(),
        ));
    }
    if !(media.boundary_h > 0.0) {
        return Err(Error::Config(format!(
            "convective film coefficient must be positive, got {}",
            media.boundary_h
        )));
    }

    let nx = grid.nx;
    let ny = grid.ny;
    let dx = grid.dx;
    let mut slot_of = vec![usize::MAX; nx * ny];
    let mut cells = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            if media.is_tissue(Cell::new(i, j)) {
                slot_of[j * nx + i] = cells.len();
                cells.push(j * nx + i);
            }
        }
    }

    let n = cells.len();
    let mut rcp = Vec::with_capacity(n);
    let mut metabolic = Vec::with_capacity(n);
    let mut perfusion = Vec::with_capacity(n);
    let mut pw = Vec::with_capacity(n);
    let mut faces = Vec::with_capacity(n);
    let mut dt = f64::INFINITY;

    for &ij in &cells {
        let (i, j) = (ij % nx, ij / nx);
        let c = Cell::new(i, j);
        let th = media.thermal_at(c);
        let k_c = th.conductivity;
        let mut cell_faces = [Face::None; 4];
        let neighbours = [
            (i > 0).then(|| ij - 1),
            (i + 1 < nx).then(|| ij + 1),
            (j > 0).then(|| ij - nx),
            (j + 1 < ny).then(|| ij + nx),
        ];
        let mut c_sum = 0.0;
        for (slot, nb) in neighbours.into_iter().enumerate() {
            let Some(nb) = nb else { continue };
            let face = if slot_of[nb] != usize::MAX {
                let k_n = media
                    .thermal_at(Cell::new(nb % nx, nb / nx))
                    .conductivity;
                // Harmonic-mean conductivity over the two half cells.
                let u = 2.0 * k_c * k_n / ((k_c + k_n) * dx);
                Face::Tissue {
                    slot: slot_of[nb],
                    c: u / dx,
                }
            } else {
                // Half a cell of tissue in series with the convective film.
                let u = 1.0 / (dx / (2.0 * k_c) + 1.0 / media.boundary_h);
                Face::Bath { c: u / dx }
            };
            match face {
                Face::Tissue { c, .. } | Face::Bath { c } => c_sum += c,
                Face::None => {}
            }
            cell_faces[slot] = face;
        }
        let cap = th.volumetric_heat_capacity();
        dt = dt.min(0.9 * cap / (c_sum + th.perfusion).max(f64::MIN_POSITIVE));
        rcp.push(cap);
        metabolic.push(th.metabolic);
        perfusion.push(th.perfusion);
        pw.push(power[[j, i]]);
        faces.push(cell_faces);
    }

    Ok(Stencil {
        cells,
        rcp,
        metabolic,
        perfusion,
        power: pw,
        faces,
        dt,
    })
}

/// Integrate until the steady criterion or the time budget is reached.
pub fn run_to_steady(
    media: &MediaMap,
    power: &Array2<f64>,
    scale: f64,
    cfg: &ThermalRunConfig,
) -> Result<ThermalRun> {
    cfg.validate()?;
    if !scale.is_finite() || scale < 0.0 {
        return Err(Error::Config(format!(
            "power scale must be finite and non-negative, got {scale}"
        )));
    }
    let st = build_stencil(media, power)?;
    let mut runner = Runner::new(media, st, scale);
    let mut rate = f64::INFINITY;
    while runner.sim_time < cfg.max_sim_time {
        rate = runner.step();
        if rate < cfg.steady_tol {
            return Ok(runner.finish(media, true, rate));
        }
    }
    Ok(runner.finish(media, false, rate))
}

/// Time for `target` to first reach `threshold` degC, if it does within the
/// time budget. The integration starts from body temperature, as
/// [`run_to_steady`] does.
pub fn time_to_temperature(
    media: &MediaMap,
    power: &Array2<f64>,
    scale: f64,
    target: Cell,
    threshold: f64,
    cfg: &ThermalRunConfig,
) -> Result<Option<f64>> {
    cfg.validate()?;
    if !media.is_tissue(target) {
        return Err(Error::Geometry(format!(
            "target cell ({}, {}) is not tissue",
            target.i, target.j
        )));
    }
    let st = build_stencil(media, power)?;
    let ij = media.grid().idx(target);
    let slot = st
        .cells
        .iter()
        .position(|&c| c == ij)
        .expect("tissue cell must own a slot");
    let mut runner = Runner::new(media, st, scale);
    if runner.temp[slot] >= threshold {
        return Ok(Some(0.0));
    }
    while runner.sim_time < cfg.max_sim_time {
        let rate = runner.step();
        if runner.temp[slot] >= threshold {
            return Ok(Some(runner.sim_time));
        }
        if rate < cfg.steady_tol {
            return Ok(None);
        }
    }
    Ok(None)
}

/// Result of calibrating the drive scale against a temperature objective.
#[derive(Clone, Debug)]
pub struct Calibration {
    /// Dimensionless multiplier on the power plane.
    pub scale: f64,
    /// Steady state with the power off (the thermal baseline).
    pub baseline: ThermalRun,
    /// Steady state at the calibrated scale.
    pub calibrated: ThermalRun,
}

/// Find the drive scale that brings `target` to `target_temp` degC at steady
/// state. The bio-heat equation is linear in the power term, so two runs fix
/// the scale exactly; a third run verifies the result to 0.1 degC.
pub fn calibrate_scale(
    media: &MediaMap,
    power: &Array2<f64>,
    target: Cell,
    target_temp: f64,
    cfg: &ThermalRunConfig,
) -> Result<Calibration> {
    if !media.is_tissue(target) {
        return Err(Error::Geometry(format!(
            "calibration target ({}, {}) is not tissue",
            target.i, target.j
        )));
    }
    let baseline = run_to_steady(media, power, 0.0, cfg)?;
    if !baseline.steady {
        return Err(Error::Calibration(
            "thermal baseline failed to reach steady state within the time budget".into(),
        ));
    }
    let probe_scale = 1.0;
    let probe = run_to_steady(media, power, probe_scale, cfg)?;
    if !probe.steady {
        return Err(Error::Calibration(
            "thermal probe run failed to reach steady state within the time budget".into(),
        ));
    }
    let t0 = baseline.temp[[target.j, target.i]];
    let t1 = probe.temp[[target.j, target.i]];
    let slope = (t1 - t0) / probe_scale;
    if slope <= f64::EPSILON {
        return Err(Error::Calibration(format!(
            "power plane deposits nothing at the target: unit scale moved it by {:.3e} degC",
            t1 - t0
        )));
    }
    if target_temp < t0 {
        return Err(Error::Config(format!(
            "target temperature {target_temp} degC is below the unheated baseline {t0:.2} degC; \
             heating cannot reach it"
        )));
    }
    let scale = (target_temp - t0) / slope;
    let calibrated = run_to_steady(media, power, scale, cfg)?;
    let achieved = calibrated.temp[[target.j, target.i]];
    if (achieved - target_temp).abs() > 0.1 {
        return Err(Error::Calibration(format!(
            "calibration verification missed the objective: wanted {target_temp} degC, \
             reached {achieved:.3} degC at scale {scale:.4e}"
        )));
    }
    Ok(Calibration {
        scale,
        baseline,
        calibrated,
    })
}

/// Double-buffered explicit integrator over the packed stencil.
struct Runner {
    st: Stencil,
    scale: f64,
    ambient: f64,
    temp: Vec<f64>,
    next: Vec<f64>,
    sim_time: f64,
    steps: usize,
}

impl Runner {
    fn new(media: &MediaMap, st: Stencil, scale: f64) -> Runner {
        let n = st.cells.len();
        Runner {
            st,
            scale,
            ambient: media.ambient_temp,
            temp: vec![BLOOD_TEMP_C; n],
            next: vec![0.0; n],
            sim_time: 0.0,
            steps: 0,
        }
    }

    /// Advance one step; returns the largest |dT/dt| encountered.
    fn step(&mut self) -> f64 {
        let st = &self.st;
        let dt = st.dt;
        let mut max_rate = 0.0f64;
        for s in 0..st.cells.len() {
            let t = self.temp[s];
            let mut flux = 0.0;
            for f in &st.faces[s] {
                match *f {
                    Face::None => {}
                    Face::Tissue { slot, c } => flux += c * (self.temp[slot] - t),
                    Face::Bath { c } => flux += c * (self.ambient - t),
                }
            }
            let rate = (flux + st.metabolic[s] + self.scale * st.power[s]
                - st.perfusion[s] * (t - BLOOD_TEMP_C))
                / st.rcp[s];
            max_rate = max_rate.max(rate.abs());
            self.next[s] = t + dt * rate;
        }
        std::mem::swap(&mut self.temp, &mut self.next);
        self.sim_time += dt;
        self.steps += 1;
        max_rate
    }

    fn finish(self, media: &MediaMap, steady: bool, final_rate: f64) -> ThermalRun {
        let grid = media.grid();
        let mut plane = Array2::from_elem((grid.ny, grid.nx), media.ambient_temp);
        for (s, &ij) in self.st.cells.iter().enumerate() {
            plane[[ij / grid.nx, ij % grid.nx]] = self.temp[s];
        }
        ThermalRun {
            temp: plane,
            sim_time: self.sim_time,
            steps: self.steps,
            dt: self.st.dt,
            steady,
            final_rate,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::tissue::Tissue;

    fn gaussian_power(grid: &GridSpec, cx: f64, cy: f64, q0: f64, width: f64) -> Array2<f64> {
        let mut q = Array2::zeros((grid.ny, grid.nx));
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let (x, y) = grid.cell_center(Cell::new(i, j));
                let r2 = (x - cx).powi(2) + (y - cy).powi(2);
                q[[j, i]] = q0 * (-r2 / (2.0 * width * width)).exp();
            }
        }
        q
    }

    fn disk_phantom(n: usize, dx: f64, radius: f64) -> MediaMap {
        let grid = GridSpec::square(n, dx).unwrap();
        let mut media = MediaMap::immersed(grid, Tissue::Water).unwrap();
        media
            .paint_disk((0.0, 0.0), radius, Tissue::Fibroglandular)
            .unwrap();
        media
    }

    /// With every face insulated (a domain that is all tissue) and no applied
    /// power, the temperature settles where metabolism balances perfusion:
    /// T = 37 + A0 / B.
    #[test]
    fn metabolism_and_perfusion_balance_at_the_analytic_point() {
        let grid = GridSpec::square(31, 1.0e-3).unwrap();
        let media = MediaMap::uniform_tissue(grid, Tissue::Fibroglandular).unwrap();
        let power = Array2::zeros((31, 31));
        let cfg = ThermalRunConfig {
            steady_tol: 1e-9,
            max_sim_time: 1.0e5,
        };
        let run = run_to_steady(&media, &power, 0.0, &cfg).unwrap();
        assert!(run.steady, "did not settle (final rate {:.3e})", run.final_rate);
        let th = Tissue::Fibroglandular.thermal();
        let expect = BLOOD_TEMP_C + th.metabolic / th.perfusion;
        assert!((expect - 37.255_555_555_555_56).abs() < 1e-12);
        for j in 0..31 {
            for i in 0..31 {
                assert!(
                    (run.temp[[j, i]] - expect).abs() < 1e-5,
                    "cell ({i}, {j}): {} vs {expect}",
                    run.temp[[j, i]]
                );
            }
        }
    }

    /// At steady state the net volumetric sources must equal the heat leaving
    /// through tissue-bath faces: the finite-volume bookkeeping conserves
    /// energy.
    #[test]
    fn steady_state_balances_sources_against_boundary_loss() {
        let media = disk_phantom(61, 1.0e-3, 20.0e-3);
        let grid = *media.grid();
        let power = gaussian_power(&grid, 0.0, 0.0, 5.0e4, 5.0e-3);
        let cfg = ThermalRunConfig {
            steady_tol: 1e-7,
            max_sim_time: 1.0e5,
        };
        let run = run_to_steady(&media, &power, 1.0, &cfg).unwrap();
        assert!(run.steady);

        let dx = grid.dx;
        let dv = dx * dx; // per metre of depth
        let mut sources = 0.0;
        let mut boundary = 0.0;
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let c = Cell::new(i, j);
                if !media.is_tissue(c) {
                    continue;
                }
                let th = media.thermal_at(c);
                let t = run.temp[[j, i]];
                sources +=
                    (th.metabolic + power[[j, i]] - th.perfusion * (t - BLOOD_TEMP_C)) * dv;
                for (ni, nj) in [
                    (i.wrapping_sub(1), j),
                    (i + 1, j),
                    (i, j.wrapping_sub(1)),
                    (i, j + 1),
                ] {
                    if ni >= grid.nx || nj >= grid.ny {
                        continue;
                    }
                    if !media.is_tissue(Cell::new(ni, nj)) {
                        let u = 1.0 / (dx / (2.0 * th.conductivity) + 1.0 / media.boundary_h);
                        boundary += u * (t - media.ambient_temp) * dx;
                    }
                }
            }
        }
        let gross = sources.abs().max(boundary.abs());
        assert!(gross > 0.0);
        let residual = (sources - boundary).abs() / gross;
        assert!(
            residual < 1e-3,
            "energy imbalance {residual:.3e} (sources {sources:.4}, boundary {boundary:.4} W/m)"
        );
    }

    /// A stronger convective film carries more heat away, so the tissue runs
    /// cooler everywhere it touches the bath.
    #[test]
    fn stronger_film_coefficient_cools_the_tissue() {
        let grid = GridSpec::square(61, 1.0e-3).unwrap();
        let power = gaussian_power(&grid, 0.0, 0.0, 2.0e4, 8.0e-3);
        let mut mean = Vec::new();
        for h in [50.0, 500.0] {
            let mut media = MediaMap::immersed(grid, Tissue::Water).unwrap();
            media
                .paint_disk((0.0, 0.0), 20.0e-3, Tissue::Fibroglandular)
                .unwrap();
            media.boundary_h = h;
            let run = run_to_steady(&media, &power, 1.0, &ThermalRunConfig::default()).unwrap();
            assert!(run.steady);
            let mut acc = 0.0;
            let mut n = 0usize;
            for j in 0..grid.ny {
                for i in 0..grid.nx {
                    if media.is_tissue(Cell::new(i, j)) {
                        acc += run.temp[[j, i]];
                        n += 1;
                    }
                }
            }
            mean.push(acc / n as f64);
        }
        assert!(
            mean[1] < mean[0] - 0.05,
            "mean tissue temperature should drop with stronger cooling: {mean:?}"
        );
    }

    /// The drive scale is calibrated by linearity; the verification run must
    /// land on the objective temperature.
    #[test]
    fn calibration_reaches_the_objective_temperature() {
        let media = disk_phantom(61, 1.0e-3, 20.0e-3);
        let grid = *media.grid();
        let target = grid.cell_at(-10.0e-3, 0.0).unwrap();
        let (tx, ty) = grid.cell_center(target);
        let power = gaussian_power(&grid, tx, ty, 1.0e4, 5.0e-3);
        let cal = calibrate_scale(&media, &power, target, 42.0, &ThermalRunConfig::default())
            .unwrap();
        assert!(cal.scale > 0.0);
        assert!(cal.baseline.steady && cal.calibrated.steady);
        let achieved = cal.calibrated.temp[[target.j, target.i]];
        assert!(
            (achieved - 42.0).abs() <= 0.1,
            "calibrated steady state reads {achieved:.3} degC"
        );
        let baseline = cal.baseline.temp[[target.j, target.i]];
        assert!(baseline < 38.0, "unheated target should sit near body temperature");
    }

    /// Heating monotonicity in time: a hotter threshold is crossed later, and
    /// a threshold above the steady state is never crossed.
    #[test]
    fn threshold_crossing_times_are_ordered() {
        let media = disk_phantom(61, 1.0e-3, 20.0e-3);
        let grid = *media.grid();
        let target = grid.cell_at(-10.0e-3, 0.0).unwrap();
        let (tx, ty) = grid.cell_center(target);
        let power = gaussian_power(&grid, tx, ty, 1.0e4, 5.0e-3);
        let cfg = ThermalRunConfig::default();
        let cal = calibrate_scale(&media, &power, target, 43.0, &cfg).unwrap();
        let hot = cal.scale * 1.1;
        let t_low = time_to_temperature(&media, &power, hot, target, 41.0, &cfg)
            .unwrap()
            .expect("41 degC must be reached");
        let t_high = time_to_temperature(&media, &power, hot, target, 43.0, &cfg)
            .unwrap()
            .expect("43 degC must be reached at 1.1x the calibrated drive");
        assert!(
            t_low < t_high,
            "41 degC at {t_low:.1} s should precede 43 degC at {t_high:.1} s"
        );
        let never = time_to_temperature(&media, &power, hot, target, 60.0, &cfg).unwrap();
        assert!(never.is_none(), "60 degC is beyond the steady state");
    }

    /// Halving the cell size must not move the steady solution: the face
    /// coefficients converge to the same continuum problem.
    #[test]
    fn steady_solution_is_stable_under_refinement() {
        let mut centre = Vec::new();
        for (n, dx) in [(61usize, 1.0e-3), (121, 0.5e-3)] {
            let media = disk_phantom(n, dx, 15.0e-3);
            let grid = *media.grid();
            let power = gaussian_power(&grid, 0.0, 0.0, 3.0e4, 4.0e-3);
            let run = run_to_steady(&media, &power, 1.0, &ThermalRunConfig::default()).unwrap();
            assert!(run.steady);
            let c = grid.cell_at(0.0, 0.0).unwrap();
            centre.push(run.temp[[c.j, c.i]]);
        }
        let diff = (centre[0] - centre[1]).abs();
        assert!(
            diff < 0.15,
            "centre temperature moved {diff:.3} degC under refinement: {centre:?}"
        );
    }

    /// Bad inputs are refused with the configuration error family.
    #[test]
    fn mismatched_power_plane_is_rejected() {
        let media = disk_phantom(61, 1.0e-3, 20.0e-3);
        let power = Array2::zeros((10, 10));
        let err = run_to_steady(&media, &power, 1.0, &ThermalRunConfig::default()).unwrap_err();
        assert!(err.to_string().contains("does not match"), "got: {err}");
        let power = Array2::from_elem((61, 61), -1.0);
        let err = run_to_steady(&media, &power, 1.0, &ThermalRunConfig::default()).unwrap_err();
        assert!(err.to_string().contains("non-negative"), "got: {err}");
    }
}
