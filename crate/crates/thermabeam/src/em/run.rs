//! High-level drivers over [`FieldState`](super::FieldState): transient pulse
//! runs that record probe series, and continuous-wave runs that accumulate a
//! period-synchronous square-field average for heating work.

use super::pml::{timestep_for, PmlConfig};
use super::source::{raised_cosine_ramp, single_bin_dft, PulseSpec};
use super::{Drive, FieldState};
use crate::error::{Error, Result};
use crate::grid::{Cell, GridSpec};
use crate::media::MediaMap;
use ndarray::Array2;
use num_complex::Complex64;

/// Hard cap on transient steps; generous multiple of a typical decay.
pub const DEFAULT_MAX_PULSE_STEPS: usize = 60_000;

/// A recorded Ez time series at one cell.
#[derive(Clone, Debug)]
pub struct ProbeRecording {
    pub cell: Cell,
    pub dt: f64,
    pub series: Vec<f64>,
}

impl ProbeRecording {
    pub fn peak_abs(&self) -> f64 {
        self.series.iter().fold(0.0, |m, &v| m.max(v.abs()))
    }

    /// Complex spectral amplitude at `f_hz` (continuous-transform scaling).
    pub fn phasor_at(&self, f_hz: f64) -> Complex64 {
        single_bin_dft(&self.series, self.dt, f_hz)
    }
}

#[derive(Clone, Debug)]
pub struct PulseRunConfig {
    pub pulse: PulseSpec,
    pub pml: PmlConfig,
    pub max_steps: usize,
}

impl PulseRunConfig {
    pub fn new(pulse: PulseSpec) -> Self {
        PulseRunConfig {
            pulse,
            pml: PmlConfig::default(),
            max_steps: DEFAULT_MAX_PULSE_STEPS,
        }
    }
}

pub struct PulseRun {
    pub recordings: Vec<ProbeRecording>,
    pub dt: f64,
    pub steps: usize,
    /// True if the run ended because the field decayed, false if it hit the
    /// step cap first.
    pub decayed: bool,
    /// Largest |Ez| seen at any monitored cell over the whole run.
    pub peak: f64,
}

fn check_interior(state: &FieldState, cell: Cell, role: &str) -> Result<()> {
    if !state.grid().contains(cell) {
        return Err(Error::Geometry(format!(
            "{role} at ({}, {}) lies outside the {}x{} grid",
            cell.i,
            cell.j,
            state.grid().nx,
            state.grid().ny
        )));
    }
    if !state.in_stretch_free_region(cell) {
        return Err(Error::Geometry(format!(
            "{role} at ({}, {}) sits inside the absorbing boundary layer",
            cell.i, cell.j
        )));
    }
    Ok(())
}

/// Excite a Gaussian-modulated pulse at `source` and record Ez at `probes`
/// until the domain rings down (or `max_steps` elapse).
pub fn run_pulse(
    media: &MediaMap,
    source: Cell,
    probes: &[Cell],
    cfg: &PulseRunConfig,
) -> Result<PulseRun> {
    cfg.pulse.validate()?;
    let mut state = FieldState::new(media, cfg.pulse.carrier_hz, &cfg.pml)?;
    check_interior(&state, source, "pulse source")?;
    for &p in probes {
        check_interior(&state, p, "probe")?;
    }
    let (_, n_p) = timestep_for(state.grid(), cfg.pulse.carrier_hz);
    let dt = state.dt();
    let mut series: Vec<Vec<f64>> = vec![Vec::with_capacity(8192); probes.len()];
    let quiet_needed = 2 * n_p;
    let mut quiet = 0usize;
    let mut peak = 0.0f64;
    let mut decayed = false;
    let mut steps = 0usize;
    while steps < cfg.max_steps {
        let t = state.drive_time();
        state.step(&[Drive {
            cell: source,
            current: cfg.pulse.eval(t),
        }])?;
        steps += 1;
        let mut level = state.ez_at(source).abs();
        for (k, &p) in probes.iter().enumerate() {
            let v = state.ez_at(p);
            series[k].push(v);
            level = level.max(v.abs());
        }
        peak = peak.max(level);
        if t > cfg.pulse.support_end() {
            if level <= 1e-6 * peak {
                quiet += 1;
                if quiet >= quiet_needed {
                    decayed = true;
                    break;
                }
            } else {
                quiet = 0;
            }
        }
    }
    state.check_finite()?;
    let recordings = probes
        .iter()
        .zip(series)
        .map(|(&cell, series)| ProbeRecording { cell, dt, series })
        .collect();
    Ok(PulseRun {
        recordings,
        dt,
        steps,
        decayed,
        peak,
    })
}

/// One continuous-wave element: Ez current drive
/// `Re[weight * exp(j w t)] = |weight| cos(w t + arg weight)`.
#[derive(Clone, Copy, Debug)]
pub struct CwDrive {
    pub cell: Cell,
    pub weight: Complex64,
}

#[derive(Clone, Debug)]
pub struct CwRunConfig {
    pub carrier_hz: f64,
    pub pml: PmlConfig,
    /// Raised-cosine turn-on length, in carrier periods.
    pub ramp_periods: usize,
    /// Never test for steadiness before this many periods (covers ramp and
    /// first domain transit).
    pub min_periods: usize,
    /// Give up waiting for steadiness after this many periods.
    pub max_periods: usize,
    /// Whole periods accumulated into the observation window after settling.
    pub observe_periods: usize,
    /// Per-period monitor RMS must change by less than this relative amount.
    pub steady_rel_tol: f64,
    /// Cell whose per-period RMS is the steadiness signal; pick the focus.
    pub monitor: Cell,
}

impl CwRunConfig {
    pub fn new(carrier_hz: f64, monitor: Cell) -> Self {
        CwRunConfig {
            carrier_hz,
            pml: PmlConfig::default(),
            ramp_periods: 5,
            min_periods: 24,
            max_periods: 48,
            observe_periods: 1,
            steady_rel_tol: 0.005,
            monitor,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.carrier_hz > 0.0) {
            return Err(Error::Config("carrier frequency must be positive".into()));
        }
        if self.ramp_periods < 1
            || self.min_periods <= self.ramp_periods + 1
            || self.max_periods < self.min_periods
        {
            return Err(Error::Config(format!(
                "period budget must satisfy 1 <= ramp < ramp + 2 <= min <= max; \
                 got ramp {}, min {}, max {}",
                self.ramp_periods, self.min_periods, self.max_periods
            )));
        }
        if self.observe_periods < 1 {
            return Err(Error::Config("need at least one observation period".into()));
        }
        if !(self.steady_rel_tol > 0.0) {
            return Err(Error::Config("steadiness tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Period-synchronous accumulation of `Ez^2 dt`, enough to form time-averaged
/// heating without storing any field history.
#[derive(Clone, Debug)]
pub struct CwObservation {
    grid: GridSpec,
    dt: f64,
    period_samples: usize,
    samples: usize,
    sum_e2_dt: Vec<f64>,
}

impl CwObservation {
    pub fn new(grid: GridSpec, dt: f64, period_samples: usize) -> Self {
        CwObservation {
            grid,
            dt,
            period_samples,
            samples: 0,
            sum_e2_dt: vec![0.0; grid.n_cells()],
        }
    }

    /// Accumulate one full Ez plane (row-major, one value per cell).
    pub fn push_plane(&mut self, ez: &[f64]) -> Result<()> {
        if ez.len() != self.sum_e2_dt.len() {
            return Err(Error::Config(format!(
                "observation plane has {} values, grid needs {}",
                ez.len(),
                self.sum_e2_dt.len()
            )));
        }
        for (acc, &e) in self.sum_e2_dt.iter_mut().zip(ez) {
            *acc += e * e * self.dt;
        }
        self.samples += 1;
        Ok(())
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn period_samples(&self) -> usize {
        self.period_samples
    }

    /// Mean-square Ez per cell over the accumulated window, shape (ny, nx).
    pub fn mean_square(&self) -> Result<Array2<f64>> {
        self.require_whole_periods()?;
        let t = self.samples as f64 * self.dt;
        let v: Vec<f64> = self.sum_e2_dt.iter().map(|&s| s / t).collect();
        Ok(Array2::from_shape_vec((self.grid.ny, self.grid.nx), v)
            .expect("accumulator length matches the grid"))
    }

    fn require_whole_periods(&self) -> Result<()> {
        if self.samples == 0 || self.samples % self.period_samples != 0 {
            return Err(Error::InsufficientData(format!(
                "time averaging needs a whole number of carrier periods; \
                 have {} samples with {} per period",
                self.samples, self.period_samples
            )));
        }
        Ok(())
    }
}

pub struct CwRun {
    pub observation: CwObservation,
    pub settled: bool,
    pub periods_run: usize,
    /// Monitor-cell RMS for each settling period, in drive order.
    pub monitor_rms: Vec<f64>,
    pub state: FieldState,
}

/// Drive all elements continuously, wait for the monitor cell to reach a
/// periodic steady state, then accumulate the observation window.
pub fn run_cw(media: &MediaMap, drives: &[CwDrive], cfg: &CwRunConfig) -> Result<CwRun> {
    cfg.validate()?;
    if drives.is_empty() {
        return Err(Error::Config("continuous-wave run needs at least one drive".into()));
    }
    let mut state = FieldState::new(media, cfg.carrier_hz, &cfg.pml)?;
    check_interior(&state, cfg.monitor, "monitor cell")?;
    for d in drives {
        check_interior(&state, d.cell, "drive element")?;
    }
    let (dt, n_p) = timestep_for(state.grid(), cfg.carrier_hz);
    let omega = 2.0 * std::f64::consts::PI * cfg.carrier_hz;
    let t_ramp = cfg.ramp_periods as f64 / cfg.carrier_hz;
    let mut drv: Vec<Drive> = drives
        .iter()
        .map(|d| Drive {
            cell: d.cell,
            current: 0.0,
        })
        .collect();
    let mut run_period = |state: &mut FieldState,
                          obs: Option<&mut CwObservation>|
     -> Result<f64> {
        let mut acc = 0.0;
        let mut obs = obs;
        for _ in 0..n_p {
            let t = state.drive_time();
            let r = raised_cosine_ramp(t, t_ramp);
            let (s, c) = (omega * t).sin_cos();
            for (slot, d) in drv.iter_mut().zip(drives) {
                slot.current = r * (d.weight.re * c - d.weight.im * s);
            }
            state.step(&drv)?;
            if let Some(o) = obs.as_deref_mut() {
                o.push_plane(&state.ez)?;
            }
            let v = state.ez_at(cfg.monitor);
            acc += v * v;
        }
        Ok((acc / n_p as f64).sqrt())
    };
    let mut monitor_rms = Vec::with_capacity(cfg.max_periods);
    let mut settled = false;
    for p in 0..cfg.max_periods {
        let rms = run_period(&mut state, None)?;
        monitor_rms.push(rms);
        if p + 1 >= cfg.min_periods {
            let prev = monitor_rms[p - 1];
            if (rms - prev).abs() <= cfg.steady_rel_tol * rms.max(f64::MIN_POSITIVE) {
                settled = true;
                break;
            }
        }
    }
    let periods_run = monitor_rms.len();
    let mut obs = CwObservation::new(*state.grid(), dt, n_p);
    for _ in 0..cfg.observe_periods {
        run_period(&mut state, Some(&mut obs))?;
    }
    state.check_finite()?;
    Ok(CwRun {
        observation: obs,
        settled,
        periods_run,
        monitor_rms,
        state,
    })
}

/// Time-averaged volumetric heating, W/m^3:
/// `Q = sigma_eff(f) * <Ez^2>` per cell, shape (ny, nx).
pub fn heating_potential(
    obs: &CwObservation,
    media: &MediaMap,
    f_hz: f64,
) -> Result<Array2<f64>> {
    if obs.grid() != media.grid() {
        return Err(Error::Config(format!(
            "observation grid {}x{} does not match media grid {}x{}",
            obs.grid().nx,
            obs.grid().ny,
            media.grid().nx,
            media.grid().ny
        )));
    }
    let mut q = obs.mean_square()?;
    for (ij, v) in q.iter_mut().enumerate() {
        *v *= media.debye_raw()[ij].effective_conductivity(f_hz);
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tissue::{DebyeParams, Tissue};

    /// Whole-period averaging of a pure tone must reproduce the closed-form
    /// mean square E0^2/2 (and heating sigma*E0^2/2) to near machine accuracy.
    #[test]
    fn heating_matches_single_cell_sinusoid() {
        let grid = GridSpec::square(31, 1e-3).unwrap();
        let mut media = MediaMap::uniform_tissue(grid, Tissue::Custom).unwrap();
        let d = DebyeParams {
            eps_inf: 1.0,
            delta_eps: 0.0,
            sigma_s: 2.0,
            tau: 0.15e-12,
        };
        for c in media.cells().collect::<Vec<_>>() {
            media.set_debye(c, d).unwrap();
        }
        let f = 2.5e9;
        let n_p = 485;
        let dt = 1.0 / f / n_p as f64;
        let e0 = 100.0;
        let mut obs = CwObservation::new(grid, dt, n_p);
        let mut plane = vec![0.0; grid.n_cells()];
        for n in 0..n_p {
            let v = e0 * (2.0 * std::f64::consts::PI * n as f64 / n_p as f64 + 0.3).sin();
            plane.iter_mut().for_each(|p| *p = v);
            obs.push_plane(&plane).unwrap();
        }
        let q = heating_potential(&obs, &media, f).unwrap();
        let expect = d.sigma_s * e0 * e0 / 2.0; // 10 kW/m^3
        let got = q[(15, 15)];
        assert!(
            ((got - expect) / expect).abs() < 1e-12,
            "Q = {got}, closed form {expect}"
        );
    }

    #[test]
    fn partial_period_average_is_refused() {
        let grid = GridSpec::square(31, 1e-3).unwrap();
        let mut obs = CwObservation::new(grid, 1e-12, 485);
        let plane = vec![1.0; grid.n_cells()];
        for _ in 0..100 {
            obs.push_plane(&plane).unwrap();
        }
        let err = obs.mean_square().unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().contains("whole number"));
    }
}
