//! Full planning pass over a generated scattered-fibroglandular phantom.
//!
//! Draws a seeded random breast section (irregular skin outline, fat interior,
//! scattered fibroglandular blobs), picks the fibroglandular cell nearest the
//! requested treatment point as the focus, designs a 16-element conjugate
//! beamformer with full knowledge of the medium, maps the deposited power, and
//! calibrates the drive so the focus settles at 44 degC. Phantom labels, the
//! power map, and the temperature map land in `example-out/realistic_phantom/`.
//!
//! Run with `cargo run --release -p thermabeam --example realistic_phantom`.
//! Pass a number to change the seed: `... --example realistic_phantom 7`.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use thermabeam::beamformer::{design, AntennaArray, DesignMode, ObjectiveVector};
use thermabeam::constants::{CARRIER_HZ, PULSE_BANDWIDTH_HZ};
use thermabeam::em::{heating_potential, run_cw, CwDrive, CwRunConfig, PulseRunConfig, PulseSpec};
use thermabeam::io::{hfgm, ppm};
use thermabeam::metrics::{focus_error, power_report};
use thermabeam::phantom::generate_scattered_fibroglandular;
use thermabeam::thermal::{calibrate_scale, ThermalRunConfig};
use thermabeam::{Cell, Error, GridSpec, MediaMap, Tissue};

fn nearest_fibroglandular(media: &MediaMap, x: f64, y: f64) -> thermabeam::Result<Cell> {
    let grid = media.grid();
    media
        .tissue_cells()
        .filter(|&c| media.tissue_at(c) == Tissue::Fibroglandular)
        .min_by(|a, b| {
            let d = |c: Cell| {
                let (cx, cy) = grid.cell_center(c);
                (cx - x).powi(2) + (cy - y).powi(2)
            };
            d(*a).total_cmp(&d(*b))
        })
        .ok_or_else(|| Error::Geometry("phantom has no fibroglandular tissue".into()))
}

fn label_plane(media: &MediaMap) -> Array2<f64> {
    let grid = media.grid();
    Array2::from_shape_fn((grid.ny, grid.nx), |(j, i)| {
        media.tissue_at(Cell::new(i, j)).code() as f64
    })
}

fn main() -> thermabeam::Result<()> {
    let seed: u64 = std::env::args()
        .nth(1)
        .map(|s| s.parse().map_err(|_| Error::Config(format!("seed must be an integer, got {s}"))))
        .transpose()?
        .unwrap_or(11);
    let out = Path::new("example-out/realistic_phantom");
    fs::create_dir_all(out).map_err(Error::from)?;

    let grid = GridSpec::square(201, 1e-3)?;
    println!("generating phantom with seed {seed} ...");
    let media = generate_scattered_fibroglandular(seed, grid)?;
    let mut counts = std::collections::BTreeMap::new();
    for c in media.tissue_cells() {
        *counts.entry(media.tissue_at(c).name()).or_insert(0usize) += 1;
    }
    let total = media.count_tissue();
    for (name, n) in &counts {
        println!("  {:<16} {:>6} cells ({:>4.1}%)", name, n, 100.0 * *n as f64 / total as f64);
    }
    hfgm::write_media(&out.join("phantom.hfgm"), &media)?;
    ppm::write_heatmap(&out.join("phantom.ppm"), &label_plane(&media), Some((0.0, 5.0)))?;

    let target = nearest_fibroglandular(&media, -0.02, 0.0)?;
    let (tx, ty) = grid.cell_center(target);
    println!("treatment focus: fibroglandular cell ({}, {}) at ({:.1}, {:.1}) mm", target.i, target.j, tx * 1e3, ty * 1e3);

    let array = AntennaArray::ring(&grid, 16, 0.08)?;
    let objective = ObjectiveVector::new(vec![target], vec![1.0])?;
    let pulse_cfg = PulseRunConfig::new(PulseSpec::new(CARRIER_HZ, PULSE_BANDWIDTH_HZ)?);
    println!("sounding and designing (full-knowledge conjugate) ...");
    let (weights, _) = design(
        DesignMode::Ideal,
        &media,
        &media,
        &array,
        &objective,
        &pulse_cfg,
        false,
    )?;
    let drives: Vec<CwDrive> = array
        .cells
        .iter()
        .zip(&weights.values)
        .map(|(&cell, &weight)| CwDrive { cell, weight })
        .collect();
    let cw = run_cw(&media, &drives, &CwRunConfig::new(CARRIER_HZ, target))?;
    let q = heating_potential(&cw.observation, &media, CARRIER_HZ)?;
    let focus = focus_error(&q, &media, target)?;
    let power = power_report(&q, &media, target, None)?;
    println!(
        "  power peak {:.2} cells from the focus; treatment disk holds {:.1}% of tissue power",
        focus.distance_cells,
        100.0 * power.treatment_region / power.total_media
    );
    ppm::write_heatmap(&out.join("q.ppm"), &q, None)?;

    println!("calibrating the drive for 44 degC at the focus ...");
    let calib = calibrate_scale(&media, &q, target, 44.0, &ThermalRunConfig::default())?;
    let temp = &calib.calibrated.temp;
    let peak = temp.iter().cloned().fold(f64::MIN, f64::max);
    println!(
        "  scale {:.4e}; focus {:.2} degC, tissue peak {:.2} degC, steady after {:.1} min",
        calib.scale,
        temp[[target.j, target.i]],
        peak,
        calib.calibrated.sim_time / 60.0
    );
    ppm::write_heatmap(&out.join("temperature.ppm"), temp, None)?;
    println!("artifacts written to {}", out.display());
    Ok(())
}
