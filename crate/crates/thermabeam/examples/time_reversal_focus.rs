//! Time-reversal focusing from first principles.
//!
//! Sounds the channel between a 16-element ring and one target cell inside a
//! homogeneous fibroglandular disk (a short pulse from the target, phasors
//! recorded at every antenna), phase-conjugates the recordings into transmit
//! weights, and drives the array CW to map the deposited power. The disk sits
//! in air here, the cleanest focusing testbed; see `immersion_comparison` for
//! what a water bath changes. The power map, a horizontal slice through the
//! target, and the -3 dB focal mask land in
//! `example-out/time_reversal_focus/`.
//!
//! Run with `cargo run --release -p thermabeam --example time_reversal_focus`.

use std::fs;
use std::path::Path;

use thermabeam::beamformer::{acquire_channel, conjugate_weights, AntennaArray};
use thermabeam::constants::{CARRIER_HZ, PULSE_BANDWIDTH_HZ};
use thermabeam::em::{heating_potential, run_cw, CwDrive, CwRunConfig, PulseRunConfig, PulseSpec};
use thermabeam::io::{csv, ppm};
use thermabeam::metrics::{contour_mask, focus_error, mask_area, slice_1d, Level};
use thermabeam::phantom::{build_homogeneous, STANDARD_DISK_RADIUS};
use thermabeam::{Error, GridSpec, Tissue};

fn main() -> thermabeam::Result<()> {
    let out = Path::new("example-out/time_reversal_focus");
    fs::create_dir_all(out).map_err(Error::from)?;

    let grid = GridSpec::square(201, 1e-3)?;
    let media = build_homogeneous(grid, Tissue::Fibroglandular, STANDARD_DISK_RADIUS, Tissue::Air)?;
    let array = AntennaArray::ring(&grid, 16, 0.07)?;
    let target = grid
        .cell_at(-0.03, 0.0)
        .ok_or_else(|| Error::Geometry("target outside grid".into()))?;

    println!(
        "sounding {}-element ring -> target at cell ({}, {}) ...",
        array.len(),
        target.i,
        target.j
    );
    let pulse_cfg = PulseRunConfig::new(PulseSpec::new(CARRIER_HZ, PULSE_BANDWIDTH_HZ)?);
    let chan = acquire_channel(&media, &array, &[target], &pulse_cfg)?;
    let weights = conjugate_weights(&chan)?;

    for (k, w) in weights.values.iter().enumerate() {
        println!("  element {k:>2}: phase {:>7.1} deg", w.arg().to_degrees());
    }
    csv::write_weights(&out.join("weights.csv"), &weights.values)?;

    println!("driving the array CW at {:.1} GHz ...", CARRIER_HZ / 1e9);
    let drives: Vec<CwDrive> = array
        .cells
        .iter()
        .zip(&weights.values)
        .map(|(&cell, &weight)| CwDrive { cell, weight })
        .collect();
    let cw = run_cw(&media, &drives, &CwRunConfig::new(CARRIER_HZ, target))?;
    println!(
        "  steady after {} carrier periods (settled: {})",
        cw.periods_run, cw.settled
    );

    let q = heating_potential(&cw.observation, &media, CARRIER_HZ)?;
    let report = focus_error(&q, &media, target)?;
    println!(
        "  in-tissue power peak at cell ({}, {}), {:.2} cells from the target",
        report.peak.i, report.peak.j, report.distance_cells
    );

    // Contour the tissue-restricted map so bath heating cannot set the peak.
    let mut q_tissue = q.clone();
    for ((j, i), v) in q_tissue.indexed_iter_mut() {
        if !media.is_tissue(thermabeam::Cell::new(i, j)) {
            *v = 0.0;
        }
    }
    let mask = contour_mask(&q_tissue, Level::DbBelowPeak(3.0))?;
    println!(
        "  -3 dB focal area: {:.1} mm^2",
        mask_area(&mask, &grid)? * 1e6
    );

    ppm::write_heatmap(&out.join("q.ppm"), &q, None)?;
    ppm::write_mask(&out.join("focal_mask.ppm"), &mask)?;
    let slice = slice_1d(&q, &grid)?;
    let rows: Vec<(f64, f64)> = slice
        .iter()
        .enumerate()
        .map(|(i, &v)| (grid.cell_center(thermabeam::Cell::new(i, grid.ny / 2)).0, v))
        .collect();
    csv::write_series(&out.join("q_slice.csv"), ("x_m", "q_w_per_m3"), &rows)?;
    println!("artifacts written to {}", out.display());
    Ok(())
}
