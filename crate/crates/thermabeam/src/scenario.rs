//! Config-driven experiment runner. One TOML file describes a phantom, an
//! antenna ring, the beamformer objectives, an optional degradation schedule
//! and an optional thermal stage; [`run_scenario`] executes the pipeline
//! (acquire, design, continuous-wave run, heating potential, reports,
//! optional calibrated heating) for every schedule step and writes a
//! deterministic artifact bundle with a hashed manifest.
//!
//! Volatile information (wall-clock runtimes) goes to a separate
//! `runlog.json` that is excluded from the manifest, so two runs with the
//! same config and seed produce bit-identical hashed bundles.

use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::beamformer::{design, AntennaArray, BeamformerWeights, DesignMode, ObjectiveVector};
use crate::constants::{CARRIER_HZ, PULSE_BANDWIDTH_HZ};
use crate::em::{
    heating_potential, run_cw, CwDrive, CwRunConfig, PulseRunConfig, PulseSpec,
    DEFAULT_MAX_PULSE_STEPS,
};
use crate::error::{Error, Result};
use crate::grid::{Cell, GridSpec};
use crate::io::{csv, hfgm, ppm};
use crate::media::MediaMap;
use crate::metrics::{
    contour_mask, focus_error, power_report, slice_1d, FocusReport, Level, PowerReport,
};
use crate::phantom::{
    apply_scenario, build_homogeneous, build_two_inclusion,
    generate_scattered_fibroglandular, load_realistic, ScenarioSchedule,
};
use crate::thermal::{calibrate_scale, run_to_steady, ThermalRunConfig};
use crate::tissue::Tissue;

fn tissue_by_name(name: &str) -> Result<Tissue> {
    Tissue::ALL
        .iter()
        .copied()
        .find(|t| t.name() == name)
        .ok_or_else(|| {
            Error::Config(format!(
                "unknown tissue '{name}'; expected one of {}",
                Tissue::ALL
                    .iter()
                    .map(|t| t.name())
                    .collect::<Vec<_>>()
                    .join(", ")
            ))
        })
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// Cells per side (square domain).
    #[serde(default = "default_grid_n")]
    pub n: usize,
    /// Cell edge, metres.
    #[serde(default = "default_grid_dx")]
    pub dx: f64,
    #[serde(default = "default_courant")]
    pub courant: f64,
    #[serde(default = "default_pml")]
    pub pml: usize,
}

fn default_grid_n() -> usize {
    200
}
fn default_grid_dx() -> f64 {
    1.0e-3
}
fn default_courant() -> f64 {
    GridSpec::DEFAULT_COURANT
}
fn default_pml() -> usize {
    GridSpec::DEFAULT_PML
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            n: default_grid_n(),
            dx: default_grid_dx(),
            courant: default_courant(),
            pml: default_pml(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum PhantomSection {
    /// Homogeneous tissue disk.
    Homogeneous {
        #[serde(default = "default_phantom_tissue")]
        tissue: String,
        #[serde(default = "default_phantom_radius")]
        radius: f64,
        #[serde(default = "default_immersion")]
        immersion: String,
    },
    /// Fatty disk with two fibroglandular inclusions.
    TwoInclusion,
    /// Seeded scattered-fibroglandular generator (uses the top-level seed).
    Scattered,
    /// Externally supplied binary grid file.
    File { path: PathBuf },
}

fn default_phantom_tissue() -> String {
    Tissue::Fibroglandular.name().to_string()
}
fn default_phantom_radius() -> f64 {
    crate::phantom::STANDARD_DISK_RADIUS
}
fn default_immersion() -> String {
    Tissue::Water.name().to_string()
}

impl Default for PhantomSection {
    fn default() -> Self {
        PhantomSection::Homogeneous {
            tissue: default_phantom_tissue(),
            radius: default_phantom_radius(),
            immersion: default_immersion(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArraySection {
    #[serde(default = "default_elements")]
    pub elements: usize,
    /// Ring radius, metres.
    #[serde(default = "default_ring_radius")]
    pub radius: f64,
}

fn default_elements() -> usize {
    16
}
fn default_ring_radius() -> f64 {
    0.07
}

impl Default for ArraySection {
    fn default() -> Self {
        ArraySection {
            elements: default_elements(),
            radius: default_ring_radius(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectivesSection {
    /// Focus position, metres from the grid centre.
    pub focus: [f64; 2],
    /// Null positions, metres.
    #[serde(default)]
    pub nulls: Vec<[f64; 2]>,
}

impl Default for ObjectivesSection {
    fn default() -> Self {
        ObjectivesSection {
            focus: [-0.03, 0.0],
            nulls: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSection {
    #[serde(default = "default_mode")]
    pub mode: DesignMode,
    /// Project constrained solutions to unit element amplitudes.
    #[serde(default)]
    pub phase_only: bool,
}

fn default_mode() -> DesignMode {
    DesignMode::Ideal
}

impl Default for DesignSection {
    fn default() -> Self {
        DesignSection {
            mode: default_mode(),
            phase_only: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    /// Degradation schedule file (TOML), resolved against the config's
    /// directory when relative.
    pub path: PathBuf,
    /// Steps to run; omitted means every step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmSection {
    #[serde(default = "default_ramp_periods")]
    pub ramp_periods: usize,
    #[serde(default = "default_min_periods")]
    pub min_periods: usize,
    #[serde(default = "default_max_periods")]
    pub max_periods: usize,
    #[serde(default = "default_observe_periods")]
    pub observe_periods: usize,
    #[serde(default = "default_steady_rel_tol")]
    pub steady_rel_tol: f64,
    /// Step cap for each acquisition sounding.
    #[serde(default = "default_acquisition_max_steps")]
    pub acquisition_max_steps: usize,
}

fn default_ramp_periods() -> usize {
    5
}
fn default_min_periods() -> usize {
    24
}
fn default_max_periods() -> usize {
    48
}
fn default_observe_periods() -> usize {
    1
}
fn default_steady_rel_tol() -> f64 {
    0.005
}
fn default_acquisition_max_steps() -> usize {
    DEFAULT_MAX_PULSE_STEPS
}

impl Default for EmSection {
    fn default() -> Self {
        EmSection {
            ramp_periods: default_ramp_periods(),
            min_periods: default_min_periods(),
            max_periods: default_max_periods(),
            observe_periods: default_observe_periods(),
            steady_rel_tol: default_steady_rel_tol(),
            acquisition_max_steps: default_acquisition_max_steps(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalSection {
    /// Calibrate the drive so the target cell settles at this temperature,
    /// degC. Mutually exclusive with `scale`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_temp: Option<f64>,
    /// Fixed power multiplier applied to the heating potential.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    /// Simulated-time budget, seconds.
    #[serde(default = "default_thermal_max_time")]
    pub max_time: f64,
    /// Steady-state detection threshold, degC per second.
    #[serde(default = "default_thermal_steady_tol")]
    pub steady_tol: f64,
    /// Absolute temperature contours to render, degC.
    #[serde(default)]
    pub thresholds: Vec<f64>,
}

fn default_thermal_max_time() -> f64 {
    14_400.0
}
fn default_thermal_steady_tol() -> f64 {
    1.0e-4
}

/// Which normalized view the per-step reports carry alongside raw numbers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// Ratios against the step-0 report of the same run.
    Baseline,
    /// Integrals of the map divided by its own target-cell value.
    Focus,
    /// Raw numbers only.
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Output directory; overridable by the command line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default = "default_normalization")]
    pub normalization: Normalization,
}

fn default_normalization() -> Normalization {
    Normalization::Baseline
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: None,
            normalization: default_normalization(),
        }
    }
}

/// Complete description of one batch experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Seed for any stochastic phantom construction; recorded in the bundle.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub phantom: PhantomSection,
    #[serde(default)]
    pub array: ArraySection,
    #[serde(default)]
    pub objectives: ObjectivesSection,
    #[serde(default)]
    pub design: DesignSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleSection>,
    #[serde(default)]
    pub em: EmSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thermal: Option<ThermalSection>,
    #[serde(default)]
    pub output: OutputSection,
}

impl ScenarioConfig {
    /// Parse a config file; relative schedule / phantom paths are resolved
    /// against the config's own directory.
    pub fn load(path: &Path) -> Result<ScenarioConfig> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg: ScenarioConfig = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(s) = &mut self.schedule {
            resolve(&mut s.path);
        }
        if let PhantomSection::File { path } = &mut self.phantom {
            resolve(path);
        }
        if let Some(d) = &mut self.output.dir {
            resolve(d);
        }
    }

    /// The fully resolved configuration as TOML, defaults included.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("config serialization: {e}")))
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        GridSpec::new(
            self.grid.n,
            self.grid.n,
            self.grid.dx,
            self.grid.courant,
            self.grid.pml,
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.grid_spec()?;
        if self.array.elements < 2 {
            return Err(Error::Config(format!(
                "antenna ring needs at least 2 elements, got {}",
                self.array.elements
            )));
        }
        let objectives = 1 + self.objectives.nulls.len();
        if objectives > self.array.elements - 1 {
            return Err(Error::Config(format!(
                "{objectives} objectives need at least {} antennas, got {}",
                objectives + 1,
                self.array.elements
            )));
        }
        match &self.phantom {
            PhantomSection::Homogeneous {
                tissue, immersion, ..
            } => {
                tissue_by_name(tissue)?;
                tissue_by_name(immersion)?;
            }
            PhantomSection::File { path } => {
                if path.as_os_str().is_empty() {
                    return Err(Error::Config("phantom file path is empty".into()));
                }
            }
            _ => {}
        }
        if let Some(t) = &self.thermal {
            match (t.target_temp, t.scale) {
                (Some(_), Some(_)) => {
                    return Err(Error::Config(
                        "thermal stage: give either target_temp or scale, not both".into(),
                    ))
                }
                (None, None) => {
                    return Err(Error::Config(
                        "thermal stage needs target_temp (calibrated) or scale (fixed)".into(),
                    ))
                }
                _ => {}
            }
            ThermalRunConfig {
                steady_tol: t.steady_tol,
                max_sim_time: t.max_time,
            }
            .validate()?;
        }
        self.cw_template(Cell::new(0, 0)).validate()?;
        Ok(())
    }

    pub fn build_phantom(&self) -> Result<MediaMap> {
        let grid = self.grid_spec()?;
        match &self.phantom {
            PhantomSection::Homogeneous {
                tissue,
                radius,
                immersion,
            } => build_homogeneous(
                grid,
                tissue_by_name(tissue)?,
                *radius,
                tissue_by_name(immersion)?,
            ),
            PhantomSection::TwoInclusion => build_two_inclusion(grid),
            PhantomSection::Scattered => generate_scattered_fibroglandular(self.seed, grid),
            PhantomSection::File { path } => {
                let media = load_realistic(path)?;
                if media.grid() != &grid {
                    return Err(Error::Config(format!(
                        "phantom file grid {}x{} at {} m does not match the configured \
                         {}x{} at {} m",
                        media.grid().nx,
                        media.grid().ny,
                        media.grid().dx,
                        grid.nx,
                        grid.ny,
                        grid.dx
                    )));
                }
                Ok(media)
            }
        }
    }

    pub fn acquisition_config(&self) -> Result<PulseRunConfig> {
        let mut cfg = PulseRunConfig::new(PulseSpec::new(CARRIER_HZ, PULSE_BANDWIDTH_HZ)?);
        cfg.max_steps = self.em.acquisition_max_steps;
        Ok(cfg)
    }

    fn cw_template(&self, monitor: Cell) -> CwRunConfig {
        let mut cw = CwRunConfig::new(CARRIER_HZ, monitor);
        cw.ramp_periods = self.em.ramp_periods;
        cw.min_periods = self.em.min_periods;
        cw.max_periods = self.em.max_periods;
        cw.observe_periods = self.em.observe_periods;
        cw.steady_rel_tol = self.em.steady_rel_tol;
        cw
    }

    /// Map the configured focus and nulls onto grid cells.
    pub fn objective_cells(&self, grid: &GridSpec) -> Result<(Cell, Vec<Cell>)> {
        let locate = |xy: [f64; 2], what: &str| {
            grid.cell_at(xy[0], xy[1]).ok_or_else(|| {
                Error::Config(format!(
                    "{what} at ({}, {}) m lies outside the {}x{} grid",
                    xy[0], xy[1], grid.nx, grid.ny
                ))
            })
        };
        let focus = locate(self.objectives.focus, "focus")?;
        let nulls = self
            .objectives
            .nulls
            .iter()
            .enumerate()
            .map(|(k, &xy)| locate(xy, &format!("null {k}")))
            .collect::<Result<Vec<_>>>()?;
        Ok((focus, nulls))
    }
}

// ---------------------------------------------------------------------------
// Records and outcomes
// ---------------------------------------------------------------------------

/// Integrals of a map divided by its own target-cell value, m^2.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelativePower {
    pub total: f64,
    pub treatment: f64,
}

/// Thermal stage results for one step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermalRecord {
    /// Power multiplier actually applied.
    pub scale: f64,
    /// True when the scale came from temperature calibration.
    pub calibrated: bool,
    pub steady: bool,
    pub sim_time: f64,
    pub solver_steps: usize,
    pub peak_temp: f64,
    pub peak_cell: Cell,
    pub temp_at_target: f64,
    /// Unheated steady peak, recorded when calibration ran.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_peak_temp: Option<f64>,
}

/// Everything measured at one schedule step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub mode: DesignMode,
    pub settled: bool,
    pub periods_run: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraint_residual: Option<f64>,
    /// Raw region powers, no normalization.
    pub power: PowerReport,
    /// Ratios against step 0, when baseline normalization is selected and
    /// step 0 is part of the run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vs_step0: Option<PowerReport>,
    /// Focus-normalized integrals, when focus normalization is selected.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relative_to_target: Option<RelativePower>,
    pub focus: FocusReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thermal: Option<ThermalRecord>,
}

/// One executed step: its record plus the in-memory maps.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub record: StepRecord,
    /// Heating potential, W/m^3, shape (ny, nx).
    pub q: Array2<f64>,
    /// Steady temperature, degC, when the thermal stage ran.
    pub temperature: Option<Array2<f64>>,
}

/// Serializable run summary (the content of `summary.json`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub normalization: Normalization,
    pub target_cell: Cell,
    pub steps: Vec<StepRecord>,
}

/// In-memory result of [`run_scenario`].
#[derive(Debug)]
pub struct RunOutput {
    pub out_dir: PathBuf,
    pub summary: RunSummary,
    pub steps: Vec<StepOutcome>,
    pub config_sha256: String,
}

#[derive(Serialize)]
struct ManifestFile {
    path: String,
    sha256: String,
    bytes: u64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    format: &'static str,
    version: u32,
    library_version: &'static str,
    config_sha256: &'a str,
    seed: u64,
    files: Vec<ManifestFile>,
}

#[derive(Serialize)]
struct RunLog {
    finished: bool,
    total_seconds: f64,
    stages: Vec<StageTime>,
}

#[derive(Serialize)]
struct StageTime {
    stage: String,
    seconds: f64,
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let out = h.finalize();
    let mut s = String::with_capacity(64);
    for b in out {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

struct StepContext<'a> {
    cfg: &'a ScenarioConfig,
    baseline: &'a MediaMap,
    schedule: Option<&'a ScenarioSchedule>,
    array: &'a AntennaArray,
    objective: &'a ObjectiveVector,
    focus: Cell,
    acq: PulseRunConfig,
    static_weights: Option<BeamformerWeights>,
    out_dir: &'a Path,
}

fn run_step(ctx: &StepContext<'_>, step: usize) -> Result<StepOutcome> {
    let cfg = ctx.cfg;
    let media = match ctx.schedule {
        Some(s) => apply_scenario(ctx.baseline, s, step).map_err(Error::in_stage("phantom"))?,
        None => ctx.baseline.clone(),
    };

    let step_dir = ctx.out_dir.join(format!("step-{step:02}"));
    std::fs::create_dir_all(&step_dir)?;
    hfgm::write_media(&step_dir.join("media.hfgm"), &media)
        .map_err(Error::in_stage("write"))?;

    let (weights, channel) = match &ctx.static_weights {
        Some(w) => (w.clone(), None),
        None => {
            let (w, c) = design(
                cfg.design.mode,
                &media,
                ctx.baseline,
                ctx.array,
                ctx.objective,
                &ctx.acq,
                cfg.design.phase_only,
            )
            .map_err(Error::in_stage("design"))?;
            (w, Some(c))
        }
    };
    csv::write_weights(&step_dir.join("weights.csv"), &weights.values)
        .map_err(Error::in_stage("write"))?;
    if let Some(c) = &channel {
        let rows: Vec<Vec<_>> = (0..c.n_antennas())
            .map(|n| (0..c.n_objectives()).map(|m| c.entries[(n, m)]).collect())
            .collect();
        csv::write_channel(&step_dir.join("channel.csv"), &rows)
            .map_err(Error::in_stage("write"))?;
    }

    let drives: Vec<CwDrive> = ctx
        .array
        .cells
        .iter()
        .zip(&weights.values)
        .map(|(&cell, &weight)| CwDrive { cell, weight })
        .collect();
    let cw = run_cw(&media, &drives, &cfg.cw_template(ctx.focus))
        .map_err(Error::in_stage("simulate-em"))?;
    let q = heating_potential(&cw.observation, &media, CARRIER_HZ)
        .map_err(Error::in_stage("simulate-em"))?;

    let grid = *media.grid();
    hfgm::write_plane(&step_dir.join("q.hfgm"), &grid, &q)
        .map_err(Error::in_stage("write"))?;
    ppm::write_heatmap(&step_dir.join("q.ppm"), &q, None)
        .map_err(Error::in_stage("write"))?;
    let slice = slice_1d(&q, &grid).map_err(Error::in_stage("metrics"))?;
    let rows: Vec<(f64, f64)> = slice
        .iter()
        .enumerate()
        .map(|(i, &v)| (grid.cell_center(Cell::new(i, 0)).0, v))
        .collect();
    csv::write_series(&step_dir.join("q_slice.csv"), ("x_m", "q_w_per_m3"), &rows)
        .map_err(Error::in_stage("write"))?;

    // Contour the tissue-restricted map so the bath cannot dominate the peak.
    let mut q_tissue = Array2::zeros(q.dim());
    for c in media.tissue_cells() {
        q_tissue[(c.j, c.i)] = q[(c.j, c.i)];
    }
    let focal = contour_mask(&q_tissue, Level::DbBelowPeak(3.0))
        .map_err(Error::in_stage("metrics"))?;
    ppm::write_mask(&step_dir.join("focal_mask.ppm"), &focal)
        .map_err(Error::in_stage("write"))?;

    let power = power_report(&q, &media, ctx.focus, None).map_err(Error::in_stage("metrics"))?;
    let focus = focus_error(&q, &media, ctx.focus).map_err(Error::in_stage("metrics"))?;

    let mut thermal_record = None;
    let mut temperature = None;
    if let Some(t) = &cfg.thermal {
        let tcfg = ThermalRunConfig {
            steady_tol: t.steady_tol,
            max_sim_time: t.max_time,
        };
        let (scale, calibrated, baseline_peak, run) = match (t.target_temp, t.scale) {
            (Some(temp), None) => {
                let cal = calibrate_scale(&media, &q, ctx.focus, temp, &tcfg)
                    .map_err(Error::in_stage("simulate-thermal"))?;
                let base_peak = cal
                    .baseline
                    .temp
                    .iter()
                    .cloned()
                    .fold(f64::NEG_INFINITY, f64::max);
                (cal.scale, true, Some(base_peak), cal.calibrated)
            }
            (None, Some(scale)) => {
                let run = run_to_steady(&media, &q, scale, &tcfg)
                    .map_err(Error::in_stage("simulate-thermal"))?;
                (scale, false, None, run)
            }
            _ => unreachable!("validated in ScenarioConfig::validate"),
        };
        let mut peak = f64::NEG_INFINITY;
        let mut peak_cell = ctx.focus;
        for c in media.tissue_cells() {
            let v = run.temp[(c.j, c.i)];
            if v > peak {
                peak = v;
                peak_cell = c;
            }
        }
        hfgm::write_plane(&step_dir.join("temperature.hfgm"), &grid, &run.temp)
            .map_err(Error::in_stage("write"))?;
        ppm::write_heatmap(&step_dir.join("temperature.ppm"), &run.temp, None)
            .map_err(Error::in_stage("write"))?;
        for &level in &t.thresholds {
            let mask = contour_mask(&run.temp, Level::Absolute(level))
                .map_err(Error::in_stage("metrics"))?;
            ppm::write_mask(
                &step_dir.join(format!("temperature-above-{level}.ppm")),
                &mask,
            )
            .map_err(Error::in_stage("write"))?;
        }
        thermal_record = Some(ThermalRecord {
            scale,
            calibrated,
            steady: run.steady,
            sim_time: run.sim_time,
            solver_steps: run.steps,
            peak_temp: peak,
            peak_cell,
            temp_at_target: run.temp[(ctx.focus.j, ctx.focus.i)],
            baseline_peak_temp: baseline_peak,
        });
        temperature = Some(run.temp);
    }

    Ok(StepOutcome {
        record: StepRecord {
            step,
            mode: cfg.design.mode,
            settled: cw.settled,
            periods_run: cw.periods_run,
            constraint_residual: weights.residual_inf,
            power,
            vs_step0: None,
            relative_to_target: None,
            focus,
            thermal: thermal_record,
        },
        q,
        temperature,
    })
}

/// Execute the configured pipeline for every selected schedule step and
/// write the artifact bundle into `out`. `workers = 0` keeps the default
/// thread count.
pub fn run_scenario(cfg: &ScenarioConfig, out: &Path, workers: usize) -> Result<RunOutput> {
    let t_start = Instant::now();
    let mut stages: Vec<StageTime> = Vec::new();
    let timed = |stages: &mut Vec<StageTime>, name: &str, since: Instant| {
        stages.push(StageTime {
            stage: name.to_string(),
            seconds: since.elapsed().as_secs_f64(),
        });
    };

    cfg.validate().map_err(Error::in_stage("config"))?;
    std::fs::create_dir_all(out)?;
    let effective = cfg.to_toml()?;
    std::fs::write(out.join("effective-config.toml"), &effective)?;
    let config_sha = sha256_hex(effective.as_bytes());

    let t = Instant::now();
    let baseline = cfg.build_phantom().map_err(Error::in_stage("phantom"))?;
    hfgm::write_media(&out.join("phantom.hfgm"), &baseline)?;
    let labels = Array2::from_shape_fn(
        (baseline.grid().ny, baseline.grid().nx),
        |(j, i)| baseline.tissue_at(Cell::new(i, j)).code() as f64,
    );
    ppm::write_heatmap(&out.join("phantom.ppm"), &labels, Some((0.0, 5.0)))?;
    timed(&mut stages, "phantom", t);

    let grid = *baseline.grid();
    let (focus, nulls) = cfg.objective_cells(&grid).map_err(Error::in_stage("config"))?;
    let objective =
        ObjectiveVector::focus_with_nulls(focus, &nulls).map_err(Error::in_stage("config"))?;
    let array = AntennaArray::ring(&grid, cfg.array.elements, cfg.array.radius)
        .map_err(Error::in_stage("config"))?;
    let acq = cfg.acquisition_config().map_err(Error::in_stage("config"))?;

    let schedule = match &cfg.schedule {
        Some(s) => Some(ScenarioSchedule::load(&s.path).map_err(Error::in_stage("schedule"))?),
        None => None,
    };
    let steps: Vec<usize> = match (&cfg.schedule, &schedule) {
        (Some(sect), Some(sched)) => match &sect.steps {
            Some(list) => {
                for &k in list {
                    if k >= sched.n_steps() {
                        return Err(Error::in_stage("schedule")(Error::Config(format!(
                            "selected step {k} out of range; the schedule has {} steps",
                            sched.n_steps()
                        ))));
                    }
                }
                let mut list = list.clone();
                list.sort_unstable();
                list.dedup();
                list
            }
            None => (0..sched.n_steps()).collect(),
        },
        _ => vec![0],
    };

    // A static design never changes with the media, so acquire it once on
    // the baseline and reuse it at every step.
    let t = Instant::now();
    let static_weights = if cfg.design.mode == DesignMode::Static {
        let (w, _) = design(
            DesignMode::Static,
            &baseline,
            &baseline,
            &array,
            &objective,
            &acq,
            cfg.design.phase_only,
        )
        .map_err(Error::in_stage("design"))?;
        Some(w)
    } else {
        None
    };
    if static_weights.is_some() {
        timed(&mut stages, "design-static", t);
    }

    let ctx = StepContext {
        cfg,
        baseline: &baseline,
        schedule: schedule.as_ref(),
        array: &array,
        objective: &objective,
        focus,
        acq,
        static_weights,
        out_dir: out,
    };

    let t = Instant::now();
    let outcomes: Result<Vec<StepOutcome>> = if workers == 1 || steps.len() == 1 {
        steps.iter().map(|&k| run_step(&ctx, k)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
        pool.install(|| steps.par_iter().map(|&k| run_step(&ctx, k)).collect())
    };
    let mut outcomes = outcomes?;
    timed(&mut stages, "steps", t);

    // Normalized views are post-processing over the raw reports.
    match cfg.output.normalization {
        Normalization::Baseline => {
            let base = outcomes
                .iter()
                .find(|o| o.record.step == 0)
                .map(|o| o.record.power);
            if let Some(base) = base {
                let ratio = |v: f64, b: f64| (b > 0.0).then(|| v / b);
                for o in &mut outcomes {
                    let p = o.record.power;
                    o.record.vs_step0 = Some(PowerReport {
                        total_ratio: ratio(p.total_media, base.total_media),
                        treatment_ratio: ratio(p.treatment_region, base.treatment_region),
                        target_ratio: ratio(p.target_cell, base.target_cell),
                        ..p
                    });
                }
            }
        }
        Normalization::Focus => {
            for o in &mut outcomes {
                let t = o.record.power.target_cell;
                if t > 0.0 {
                    o.record.relative_to_target = Some(RelativePower {
                        total: o.record.power.total_media / t,
                        treatment: o.record.power.treatment_region / t,
                    });
                }
            }
        }
        Normalization::None => {}
    }

    for o in &outcomes {
        write_json(
            &out.join(format!("step-{:02}/report.json", o.record.step)),
            &o.record,
        )?;
    }

    let summary = RunSummary {
        seed: cfg.seed,
        normalization: cfg.output.normalization,
        target_cell: focus,
        steps: outcomes.iter().map(|o| o.record.clone()).collect(),
    };
    write_json(&out.join("summary.json"), &summary)?;

    // Hash every artifact, sorted by path, into the manifest. The runlog is
    // intentionally outside the manifest: it holds wall-clock times.
    let mut files: Vec<ManifestFile> = Vec::new();
    collect_files(out, out, &mut files)?;
    files.retain(|f| f.path != "manifest.json" && f.path != "runlog.json");
    files.sort_by(|a, b| a.path.cmp(&b.path));
    let manifest = Manifest {
        format: "thermabeam-bundle",
        version: 1,
        library_version: env!("CARGO_PKG_VERSION"),
        config_sha256: &config_sha,
        seed: cfg.seed,
        files,
    };
    write_json(&out.join("manifest.json"), &manifest)?;

    let runlog = RunLog {
        finished: true,
        total_seconds: t_start.elapsed().as_secs_f64(),
        stages,
    };
    write_json(&out.join("runlog.json"), &runlog)?;

    Ok(RunOutput {
        out_dir: out.to_path_buf(),
        summary,
        steps: outcomes,
        config_sha256: config_sha,
    })
}

fn collect_files(root: &Path, dir: &Path, files: &mut Vec<ManifestFile>) -> Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        let path = entry.path();
        if path.is_dir() {
            collect_files(root, &path, files)?;
        } else {
            let bytes = std::fs::read(&path)?;
            let rel = path
                .strip_prefix(root)
                .unwrap_or(&path)
                .components()
                .map(|c| c.as_os_str().to_string_lossy())
                .collect::<Vec<_>>()
                .join("/");
            files.push(ManifestFile {
                path: rel,
                sha256: sha256_hex(&bytes),
                bytes: bytes.len() as u64,
            });
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Run comparison
// ---------------------------------------------------------------------------

/// Differences between two finished run bundles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    /// Final-step power ratios, run B over run A.
    pub target_ratio: f64,
    pub treatment_ratio: f64,
    pub total_ratio: f64,
    pub focus_error_a: f64,
    pub focus_error_b: f64,
    /// Jaccard overlap of the final-step half-power contours.
    pub contour_overlap: f64,
    /// Per-step target-cell ratios, when both runs cover the same steps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_step_target_ratio: Option<Vec<f64>>,
}

fn load_summary(dir: &Path) -> Result<RunSummary> {
    let path = dir.join("summary.json");
    let text = std::fs::read_to_string(&path)?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// Compare two run bundles on disk: final-step power ratios (B/A), focus
/// errors, and half-power contour overlap.
pub fn compare_runs(dir_a: &Path, dir_b: &Path) -> Result<CompareReport> {
    let a = load_summary(dir_a)?;
    let b = load_summary(dir_b)?;
    let last_a = a
        .steps
        .last()
        .ok_or_else(|| Error::Comparison("run A has no steps".into()))?;
    let last_b = b
        .steps
        .last()
        .ok_or_else(|| Error::Comparison("run B has no steps".into()))?;
    let (grid_a, qa) = hfgm::read_plane(&dir_a.join(format!("step-{:02}/q.hfgm", last_a.step)))?;
    let (grid_b, qb) = hfgm::read_plane(&dir_b.join(format!("step-{:02}/q.hfgm", last_b.step)))?;
    if grid_a != grid_b {
        return Err(Error::Comparison(format!(
            "grids differ: {}x{} at {} m vs {}x{} at {} m",
            grid_a.nx, grid_a.ny, grid_a.dx, grid_b.nx, grid_b.ny, grid_b.dx
        )));
    }
    let ratio = |vb: f64, va: f64| {
        if va > 0.0 {
            vb / va
        } else {
            f64::NAN
        }
    };
    let mask_a = contour_mask(&qa, Level::DbBelowPeak(3.0))?;
    let mask_b = contour_mask(&qb, Level::DbBelowPeak(3.0))?;
    let mut inter = 0usize;
    let mut union = 0usize;
    for (&x, &y) in mask_a.iter().zip(mask_b.iter()) {
        if x && y {
            inter += 1;
        }
        if x || y {
            union += 1;
        }
    }
    let per_step = (a.steps.len() == b.steps.len()
        && a.steps
            .iter()
            .zip(&b.steps)
            .all(|(x, y)| x.step == y.step))
    .then(|| {
        a.steps
            .iter()
            .zip(&b.steps)
            .map(|(x, y)| ratio(y.power.target_cell, x.power.target_cell))
            .collect::<Vec<_>>()
    });
    Ok(CompareReport {
        target_ratio: ratio(last_b.power.target_cell, last_a.power.target_cell),
        treatment_ratio: ratio(last_b.power.treatment_region, last_a.power.treatment_region),
        total_ratio: ratio(last_b.power.total_media, last_a.power.total_media),
        focus_error_a: last_a.focus.distance_cells,
        focus_error_b: last_b.focus.distance_cells,
        contour_overlap: if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        },
        per_step_target_ratio: per_step,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_a_minimal_config() {
        let cfg: ScenarioConfig = toml::from_str("").unwrap();
        assert_eq!(cfg.grid.n, 200);
        assert_eq!(cfg.array.elements, 16);
        assert_eq!(cfg.design.mode, DesignMode::Ideal);
        assert_eq!(cfg.objectives.focus, [-0.03, 0.0]);
        assert!(cfg.validate().is_ok());
        // defaults must survive a round trip through the effective dump
        let dumped = cfg.to_toml().unwrap();
        let back: ScenarioConfig = toml::from_str(&dumped).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_keys_are_refused() {
        let err = toml::from_str::<ScenarioConfig>("[gird]\nn = 100\n").unwrap_err();
        assert!(err.to_string().contains("gird"));
    }

    #[test]
    fn objective_count_is_checked_against_the_array() {
        let mut cfg = ScenarioConfig::default();
        cfg.array.elements = 4;
        cfg.objectives.nulls = vec![[0.0, 0.01], [0.0, 0.02], [0.0, 0.03]];
        let err = cfg.validate().unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("antennas"));
    }

    #[test]
    fn thermal_section_needs_exactly_one_power_choice() {
        let mut cfg = ScenarioConfig::default();
        cfg.thermal = Some(ThermalSection {
            target_temp: None,
            scale: None,
            max_time: 100.0,
            steady_tol: 1e-4,
            thresholds: vec![],
        });
        assert!(cfg.validate().is_err());
        cfg.thermal = Some(ThermalSection {
            target_temp: Some(45.0),
            scale: Some(2.0),
            max_time: 100.0,
            steady_tol: 1e-4,
            thresholds: vec![],
        });
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn phantom_kinds_parse_and_build() {
        let text = r#"
            [phantom]
            kind = "two-inclusion"
        "#;
        let cfg: ScenarioConfig = toml::from_str(text).unwrap();
        let media = cfg.build_phantom().unwrap();
        assert_eq!(media.immersion(), Tissue::Water);
        let c = media.grid().cell_at(-0.03, 0.0).unwrap();
        assert_eq!(media.tissue_at(c), Tissue::Fibroglandular);

        let text = r#"
            seed = 5
            [grid]
            n = 181
            [phantom]
            kind = "scattered"
        "#;
        let cfg: ScenarioConfig = toml::from_str(text).unwrap();
        let media = cfg.build_phantom().unwrap();
        assert!(media.tissue_fraction(Tissue::Fibroglandular) >= 0.20);
    }

    #[test]
    fn relative_paths_resolve_against_the_config_directory() {
        let dir = tempfile::tempdir().unwrap();
        let sched = crate::phantom::canonical_schedule(
            crate::phantom::ScheduleKind::TreatmentOnly,
            8,
        )
        .unwrap();
        sched.save(&dir.path().join("s.toml")).unwrap();
        let cfg_path = dir.path().join("run.toml");
        std::fs::write(&cfg_path, "[schedule]\npath = \"s.toml\"\n").unwrap();
        let cfg = ScenarioConfig::load(&cfg_path).unwrap();
        assert_eq!(cfg.schedule.unwrap().path, dir.path().join("s.toml"));
    }
}
