//! Why the antennas sit in a water bath.
//!
//! Builds the same fibroglandular disk twice, once immersed in water and once
//! in air, designs a 16-element conjugate focus for each, and calibrates the
//! water drive so the target settles at 42 degC. The air run then gets the
//! identical drive scale. The air-tissue boundary reflects most of the
//! incident field (an order of magnitude less power enters), but what does
//! enter piles up against a nearly insulated surface: no bath to carry heat
//! away, so the tissue is still warming when the 20-minute budget expires,
//! with the edge running about 10 degC hotter than in water. The water bath
//! both admits the field efficiently and holds the surface cold, and that run
//! settles in around a quarter of an hour. Temperature maps land in
//! `example-out/immersion_comparison/`.
//!
//! Run with `cargo run --release -p thermabeam --example immersion_comparison`.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use thermabeam::beamformer::{acquire_channel, conjugate_weights, AntennaArray};
use thermabeam::constants::{CARRIER_HZ, PULSE_BANDWIDTH_HZ};
use thermabeam::em::{heating_potential, run_cw, CwDrive, CwRunConfig, PulseRunConfig, PulseSpec};
use thermabeam::io::ppm;
use thermabeam::phantom::{build_homogeneous, STANDARD_DISK_RADIUS};
use thermabeam::thermal::{calibrate_scale, run_to_steady, ThermalRunConfig};
use thermabeam::{Cell, Error, GridSpec, MediaMap, Tissue};

/// EM chain for one immersion medium: sound, conjugate, drive CW, map Q.
fn power_map(media: &MediaMap, target: Cell) -> thermabeam::Result<Array2<f64>> {
    let array = AntennaArray::ring(media.grid(), 16, 0.07)?;
    let pulse_cfg = PulseRunConfig::new(PulseSpec::new(CARRIER_HZ, PULSE_BANDWIDTH_HZ)?);
    let chan = acquire_channel(media, &array, &[target], &pulse_cfg)?;
    let weights = conjugate_weights(&chan)?;
    let drives: Vec<CwDrive> = array
        .cells
        .iter()
        .zip(&weights.values)
        .map(|(&cell, &weight)| CwDrive { cell, weight })
        .collect();
    let cw = run_cw(media, &drives, &CwRunConfig::new(CARRIER_HZ, target))?;
    heating_potential(&cw.observation, media, CARRIER_HZ)
}

fn main() -> thermabeam::Result<()> {
    let out = Path::new("example-out/immersion_comparison");
    fs::create_dir_all(out).map_err(Error::from)?;

    let grid = GridSpec::square(201, 1e-3)?;
    let target = grid
        .cell_at(-0.03, 0.0)
        .ok_or_else(|| Error::Geometry("target outside grid".into()))?;
    let water = build_homogeneous(grid, Tissue::Fibroglandular, STANDARD_DISK_RADIUS, Tissue::Water)?;
    let air = build_homogeneous(grid, Tissue::Fibroglandular, STANDARD_DISK_RADIUS, Tissue::Air)?;

    println!("EM chain, water immersion ...");
    let q_water = power_map(&water, target)?;
    println!("EM chain, air immersion ...");
    let q_air = power_map(&air, target)?;
    let peak_w = q_water.iter().cloned().fold(0.0f64, f64::max);
    let peak_a = q_air.iter().cloned().fold(0.0f64, f64::max);
    println!(
        "unit-drive heating at its peak: water {:.3e}, air {:.3e} W/m^3 \
         (air couples {:.0}x less power; the air-tissue boundary reflects)",
        peak_w,
        peak_a,
        peak_w / peak_a
    );

    // Calibrate in water with a generous budget, then judge both immersions
    // against the same 20-minute horizon and steadiness threshold.
    println!("calibrating the water drive for 42 degC at the target ...");
    let calib_cfg = ThermalRunConfig::default();
    let calib = calibrate_scale(&water, &q_water, target, 42.0, &calib_cfg)?;
    println!("  drive scale {:.4e}", calib.scale);

    let horizon = ThermalRunConfig {
        steady_tol: 2e-3,
        max_sim_time: 20.0 * 60.0,
    };
    let run_w = run_to_steady(&water, &q_water, calib.scale, &horizon)?;
    let run_a = run_to_steady(&air, &q_air, calib.scale, &horizon)?;

    for (label, run) in [("water", &run_w), ("air", &run_a)] {
        let peak = run.temp.iter().cloned().fold(f64::MIN, f64::max);
        let verdict = if run.steady {
            format!("steady after {:.2} simulated minutes", run.sim_time / 60.0)
        } else {
            format!(
                "NOT steady at the {:.0}-minute horizon (still {:.2e} degC/s)",
                run.sim_time / 60.0,
                run.final_rate
            )
        };
        println!(
            "  {label:<5} target {:6.2} degC, tissue peak {:6.2} degC, {verdict}",
            run.temp[[target.j, target.i]],
            peak
        );
        ppm::write_heatmap(&out.join(format!("temperature_{label}.ppm")), &run.temp, None)?;
    }

    println!("temperature maps written to {}", out.display());
    Ok(())
}
