//! Focal quality versus array element count.
//!
//! Sounds a 32-element ring around an air-immersed fibroglandular disk once,
//! then designs conjugate beamformers for the
//! nested 4-, 8-, 16-, and 32-element sub-rings (every 8th, 4th, 2nd, and
//! every element; the channel rows are just subset, no re-acquisition). For
//! each count the CW power map gives the focal-spot offset, the -3 dB focal
//! area, and the fraction of tissue-deposited power landing inside the 1 cm
//! treatment disk: more elements shrink the spot and concentrate power. A
//! summary CSV and the four focal masks land in
//! `example-out/element_count_sweep/`.
//!
//! Run with `cargo run --release -p thermabeam --example element_count_sweep`.

use std::fs;
use std::path::Path;

use thermabeam::beamformer::{acquire_channel, conjugate_weights, AntennaArray};
use thermabeam::constants::{CARRIER_HZ, PULSE_BANDWIDTH_HZ};
use thermabeam::em::{heating_potential, run_cw, CwDrive, CwRunConfig, PulseRunConfig, PulseSpec};
use thermabeam::io::{csv, ppm};
use thermabeam::metrics::{contour_mask, focus_error, mask_area, power_report, Level};
use thermabeam::phantom::{build_homogeneous, STANDARD_DISK_RADIUS};
use thermabeam::{Cell, Error, GridSpec, Tissue};

fn main() -> thermabeam::Result<()> {
    let out = Path::new("example-out/element_count_sweep");
    fs::create_dir_all(out).map_err(Error::from)?;

    let grid = GridSpec::square(201, 1e-3)?;
    let media = build_homogeneous(grid, Tissue::Fibroglandular, STANDARD_DISK_RADIUS, Tissue::Air)?;
    let full = AntennaArray::ring(&grid, 32, 0.07)?;
    let target = grid
        .cell_at(-0.03, 0.0)
        .ok_or_else(|| Error::Geometry("target outside grid".into()))?;

    println!("sounding the full 32-element ring once ...");
    let pulse_cfg = PulseRunConfig::new(PulseSpec::new(CARRIER_HZ, PULSE_BANDWIDTH_HZ)?);
    let chan32 = acquire_channel(&media, &full, &[target], &pulse_cfg)?;

    println!();
    println!(
        "{:>8} {:>12} {:>16} {:>16}",
        "elements", "offset", "-3dB area mm^2", "treat/total"
    );
    let mut rows = Vec::new();
    for n in [4usize, 8, 16, 32] {
        let stride = 32 / n;
        let keep: Vec<usize> = (0..32).step_by(stride).collect();
        let chan = chan32.subset_antennas(&keep)?;
        let weights = conjugate_weights(&chan)?;
        let drives: Vec<CwDrive> = chan
            .antennas
            .iter()
            .zip(&weights.values)
            .map(|(&cell, &weight)| CwDrive { cell, weight })
            .collect();
        let cw = run_cw(&media, &drives, &CwRunConfig::new(CARRIER_HZ, target))?;
        let q = heating_potential(&cw.observation, &media, CARRIER_HZ)?;

        let focus = focus_error(&q, &media, target)?;
        let mut q_tissue = q.clone();
        for ((j, i), v) in q_tissue.indexed_iter_mut() {
            if !media.is_tissue(Cell::new(i, j)) {
                *v = 0.0;
            }
        }
        let mask = contour_mask(&q_tissue, Level::DbBelowPeak(3.0))?;
        let area_mm2 = mask_area(&mask, &grid)? * 1e6;
        let power = power_report(&q, &media, target, None)?;
        let frac = power.treatment_region / power.total_media;
        println!(
            "{:>8} {:>12} {:>16.1} {:>16.3e}",
            n,
            format!("{:.2} cells", focus.distance_cells),
            area_mm2,
            frac
        );
        ppm::write_mask(&out.join(format!("focal_mask_{n:02}.ppm")), &mask)?;
        rows.push((n as f64, area_mm2));
    }
    csv::write_series(&out.join("focal_area_vs_elements.csv"), ("elements", "area_mm2"), &rows)?;
    println!();
    println!("masks and the area sweep written to {}", out.display());
    Ok(())
}
