//! Batch experiment frontend. Every simulation subcommand is driven by one
//! TOML scenario config; primitives (`build-phantom`, `acquire`, `design`)
//! run a prefix of the pipeline, `simulate-em` / `simulate-thermal` /
//! `run-scenario` run it end to end, and `compare` / `export` operate on
//! finished artifacts.
//!
//! Exit codes: 0 success, 2 configuration or geometry error, 3 numerical
//! failure, 4 I/O or file-format error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ndarray::Array2;

use thermabeam::beamformer::{design, AntennaArray, ObjectiveVector};
use thermabeam::io::{csv, hfgm, ppm};
use thermabeam::scenario::{compare_runs, run_scenario, ScenarioConfig};
use thermabeam::{Cell, Error, Result};

#[derive(Parser)]
#[command(
    name = "thermabeam",
    version,
    about = "Coupled electromagnetic / thermal planning runs for microwave hyperthermia"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Scenario config file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config's `[output] dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for parallel stages (0 = automatic).
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Print the fully resolved configuration and exit.
    #[arg(long)]
    print_effective_config: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Build the configured phantom; write the binary grid and a preview.
    BuildPhantom(ConfigArgs),
    /// Sound the channel matrix on the baseline phantom; write it as CSV.
    Acquire(ConfigArgs),
    /// Acquire and synthesize beamformer weights.
    Design(ConfigArgs),
    /// Electromagnetic pipeline: design, continuous-wave run, heating
    /// potential, reports (any thermal section is ignored).
    SimulateEm(ConfigArgs),
    /// Full pipeline including the thermal stage (the config must carry a
    /// `[thermal]` section).
    SimulateThermal(ConfigArgs),
    /// Run the configured scenario exactly as written, schedule and all.
    RunScenario(ConfigArgs),
    /// Diff two finished run bundles.
    Compare {
        run_a: PathBuf,
        run_b: PathBuf,
        /// Also write the report as JSON into this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convert a binary grid artifact (scalar plane or media map) to CSV
    /// plus a raster preview.
    Export {
        input: PathBuf,
        /// Output directory (defaults to the input's directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::BuildPhantom(a) => with_config(a, cmd_build_phantom),
        Command::Acquire(a) => with_config(a, cmd_acquire),
        Command::Design(a) => with_config(a, cmd_design),
        Command::SimulateEm(a) => with_config(a, cmd_simulate_em),
        Command::SimulateThermal(a) => with_config(a, cmd_simulate_thermal),
        Command::RunScenario(a) => with_config(a, cmd_run_scenario),
        Command::Compare { run_a, run_b, out } => cmd_compare(&run_a, &run_b, out.as_deref()),
        Command::Export { input, out } => cmd_export(&input, out.as_deref()),
    }
}

struct Resolved {
    cfg: ScenarioConfig,
    out: PathBuf,
    workers: usize,
}

fn with_config(args: ConfigArgs, run: fn(Resolved) -> Result<()>) -> Result<()> {
    let mut cfg = ScenarioConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.output.dir = Some(out.clone());
    }
    if args.print_effective_config {
        print!("{}", cfg.to_toml()?);
        return Ok(());
    }
    let out = cfg.output.dir.clone().ok_or_else(|| {
        Error::Config("no output directory: pass --out or set [output] dir".into())
    })?;
    std::fs::create_dir_all(&out)?;
    run(Resolved {
        cfg,
        out,
        workers: args.workers,
    })
}

fn cmd_build_phantom(r: Resolved) -> Result<()> {
    let media = r.cfg.build_phantom()?;
    let grid = media.grid();
    hfgm::write_media(&r.out.join("phantom.hfgm"), &media)?;
    let labels = Array2::from_shape_fn((grid.ny, grid.nx), |(j, i)| {
        media.tissue_at(Cell::new(i, j)).code() as f64
    });
    ppm::write_heatmap(&r.out.join("phantom.ppm"), &labels, Some((0.0, 5.0)))?;
    println!(
        "phantom: {}x{} cells at {} m, {} tissue cells, immersion {}",
        grid.nx,
        grid.ny,
        grid.dx,
        media.count_tissue(),
        media.immersion().name()
    );
    println!("wrote {}", r.out.join("phantom.hfgm").display());
    Ok(())
}

fn array_and_objectives(
    cfg: &ScenarioConfig,
    media: &thermabeam::MediaMap,
) -> Result<(AntennaArray, ObjectiveVector)> {
    let grid = media.grid();
    let (focus, nulls) = cfg.objective_cells(grid)?;
    let objective = ObjectiveVector::focus_with_nulls(focus, &nulls)?;
    let array = AntennaArray::ring(grid, cfg.array.elements, cfg.array.radius)?;
    Ok((array, objective))
}

fn cmd_acquire(r: Resolved) -> Result<()> {
    let media = r.cfg.build_phantom()?;
    let (array, objective) = array_and_objectives(&r.cfg, &media)?;
    let chan = thermabeam::beamformer::acquire_channel(
        &media,
        &array,
        &objective.cells,
        &r.cfg.acquisition_config()?,
    )?;
    let rows: Vec<Vec<_>> = (0..chan.n_antennas())
        .map(|n| (0..chan.n_objectives()).map(|m| chan.entries[(n, m)]).collect())
        .collect();
    csv::write_channel(&r.out.join("channel.csv"), &rows)?;
    println!(
        "channel: {} antennas x {} objectives at {:.3e} Hz",
        chan.n_antennas(),
        chan.n_objectives(),
        chan.carrier_hz
    );
    println!("wrote {}", r.out.join("channel.csv").display());
    Ok(())
}

fn cmd_design(r: Resolved) -> Result<()> {
    let media = r.cfg.build_phantom()?;
    let (array, objective) = array_and_objectives(&r.cfg, &media)?;
    let (weights, chan) = design(
        r.cfg.design.mode,
        &media,
        &media,
        &array,
        &objective,
        &r.cfg.acquisition_config()?,
        r.cfg.design.phase_only,
    )?;
    csv::write_weights(&r.out.join("weights.csv"), &weights.values)?;
    let rows: Vec<Vec<_>> = (0..chan.n_antennas())
        .map(|n| (0..chan.n_objectives()).map(|m| chan.entries[(n, m)]).collect())
        .collect();
    csv::write_channel(&r.out.join("channel.csv"), &rows)?;
    match weights.residual_inf {
        Some(res) => println!(
            "design: {} mode, {} elements, constraint residual {res:.3e}",
            weights.mode.name(),
            weights.values.len()
        ),
        None => println!(
            "design: {} mode, {} elements, conjugate phasing",
            weights.mode.name(),
            weights.values.len()
        ),
    }
    println!("wrote {}", r.out.join("weights.csv").display());
    Ok(())
}

fn report_run(out: &thermabeam::scenario::RunOutput) {
    for s in &out.summary.steps {
        let ratio = s
            .vs_step0
            .as_ref()
            .and_then(|v| v.target_ratio)
            .map(|x| format!(", target ratio {x:.3}"))
            .unwrap_or_default();
        let thermal = s
            .thermal
            .as_ref()
            .map(|t| {
                format!(
                    ", thermal: {:.2} degC at target ({})",
                    t.temp_at_target,
                    if t.steady { "steady" } else { "budget hit" }
                )
            })
            .unwrap_or_default();
        println!(
            "step {:02} [{}]: target {:.4e} W/m^3, focus error {:.1} cells{}{}",
            s.step,
            s.mode.name(),
            s.power.target_cell,
            s.focus.distance_cells,
            ratio,
            thermal
        );
    }
    println!("bundle: {}", out.out_dir.display());
}

fn cmd_simulate_em(mut r: Resolved) -> Result<()> {
    r.cfg.thermal = None;
    let out = run_scenario(&r.cfg, &r.out, r.workers)?;
    report_run(&out);
    Ok(())
}

fn cmd_simulate_thermal(r: Resolved) -> Result<()> {
    if r.cfg.thermal.is_none() {
        return Err(Error::Config(
            "simulate-thermal needs a [thermal] section in the config".into(),
        ));
    }
    let out = run_scenario(&r.cfg, &r.out, r.workers)?;
    report_run(&out);
    Ok(())
}

fn cmd_run_scenario(r: Resolved) -> Result<()> {
    let out = run_scenario(&r.cfg, &r.out, r.workers)?;
    report_run(&out);
    Ok(())
}

fn cmd_compare(run_a: &Path, run_b: &Path, out: Option<&Path>) -> Result<()> {
    let report = compare_runs(run_a, run_b)?;
    let text = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::Format(format!("report serialization: {e}")))?;
    println!("{text}");
    if let Some(path) = out {
        std::fs::write(path, text + "\n")?;
    }
    Ok(())
}

fn cmd_export(input: &Path, out: Option<&Path>) -> Result<()> {
    let dir = match out {
        Some(d) => d.to_path_buf(),
        None => input
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from(".")),
    };
    std::fs::create_dir_all(&dir)?;
    let stem = input
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("export");
    if let Ok((_, plane)) = hfgm::read_plane(input) {
        let csv_path = dir.join(format!("{stem}.csv"));
        let ppm_path = dir.join(format!("{stem}.ppm"));
        csv::write_matrix(&csv_path, &plane)?;
        ppm::write_heatmap(&ppm_path, &plane, None)?;
        println!("wrote {} and {}", csv_path.display(), ppm_path.display());
        return Ok(());
    }
    let media = hfgm::read_media(input).map_err(|e| {
        Error::Format(format!(
            "{}: neither a scalar plane nor a media map ({e})",
            input.display()
        ))
    })?;
    let grid = media.grid();
    let labels = Array2::from_shape_fn((grid.ny, grid.nx), |(j, i)| {
        media.tissue_at(Cell::new(i, j)).code() as f64
    });
    let csv_path = dir.join(format!("{stem}-labels.csv"));
    let ppm_path = dir.join(format!("{stem}-labels.ppm"));
    csv::write_matrix(&csv_path, &labels)?;
    ppm::write_heatmap(&ppm_path, &labels, Some((0.0, 5.0)))?;
    println!("wrote {} and {}", csv_path.display(), ppm_path.display());
    Ok(())
}
