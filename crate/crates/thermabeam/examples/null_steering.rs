//! Protecting a secondary inclusion with LCMP nulls.
//!
//! The two-inclusion phantom has a treatment inclusion at (-3 cm, 0) and a
//! sensitive secondary inclusion at (+3 cm, 0), both more conductive than the
//! surrounding fat, so a plain conjugate focus on the left inclusion still
//! dumps real power into the right one. A linearly-constrained (LCMP) design
//! keeps the focus gain at one while pinning three cells across the secondary
//! inclusion to zero. Both weight vectors are normalized to the same total
//! drive power before comparison; the maps land in
//! `example-out/null_steering/`.
//!
//! Run with `cargo run --release -p thermabeam --example null_steering`.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64;
use thermabeam::beamformer::{
    acquire_channel, conjugate_weights, lcmp_weights, AntennaArray, ObjectiveVector,
};
use thermabeam::constants::{CARRIER_HZ, PULSE_BANDWIDTH_HZ};
use thermabeam::em::{heating_potential, run_cw, CwDrive, CwRunConfig, PulseRunConfig, PulseSpec};
use thermabeam::io::ppm;
use thermabeam::phantom::build_two_inclusion;
use thermabeam::{Cell, Error, GridSpec, MediaMap, Tissue};

/// Rescale weights so every design spends the same total drive power
/// `sum |w|^2 = n`, the budget a unit-amplitude phase-only array uses.
fn normalize_drive(values: &[Complex64]) -> Vec<Complex64> {
    let total: f64 = values.iter().map(|w| w.norm_sqr()).sum();
    let gain = (values.len() as f64 / total).sqrt();
    values.iter().map(|w| w * gain).collect()
}

fn run_map(
    media: &MediaMap,
    array: &AntennaArray,
    values: &[Complex64],
    monitor: Cell,
) -> thermabeam::Result<Array2<f64>> {
    let drives: Vec<CwDrive> = array
        .cells
        .iter()
        .zip(values)
        .map(|(&cell, &weight)| CwDrive { cell, weight })
        .collect();
    let cw = run_cw(media, &drives, &CwRunConfig::new(CARRIER_HZ, monitor))?;
    heating_potential(&cw.observation, media, CARRIER_HZ)
}

/// Integrated power over the secondary-inclusion disk, W/m.
fn secondary_power(q: &Array2<f64>, media: &MediaMap) -> f64 {
    let grid = media.grid();
    let mut acc = 0.0;
    for c in media.tissue_cells() {
        let (x, y) = grid.cell_center(c);
        let (dx, dy) = (x - 0.03, y);
        if dx * dx + dy * dy <= 0.02f64 * 0.02 {
            acc += q[[c.j, c.i]] * grid.dx * grid.dy;
        }
    }
    acc
}

fn main() -> thermabeam::Result<()> {
    let out = Path::new("example-out/null_steering");
    fs::create_dir_all(out).map_err(Error::from)?;

    let grid = GridSpec::square(201, 1e-3)?;
    let media = build_two_inclusion(grid)?;
    let array = AntennaArray::ring(&grid, 16, 0.08)?;
    let at = |x: f64, y: f64| {
        grid.cell_at(x, y)
            .ok_or_else(|| Error::Geometry("objective outside grid".into()))
    };
    let focus = at(-0.03, 0.0)?;
    let nulls = [at(0.03, 0.0)?, at(0.03, 0.008)?, at(0.03, -0.008)?];
    assert!(media.tissue_at(focus) == Tissue::Fibroglandular);

    let pulse_cfg = PulseRunConfig::new(PulseSpec::new(CARRIER_HZ, PULSE_BANDWIDTH_HZ)?);

    println!("single-objective conjugate focus ...");
    let chan_f = acquire_channel(&media, &array, &[focus], &pulse_cfg)?;
    let w_single = normalize_drive(&conjugate_weights(&chan_f)?.values);
    let q_single = run_map(&media, &array, &w_single, focus)?;

    println!("constrained focus with three nulls across the secondary inclusion ...");
    let mut cells = vec![focus];
    cells.extend_from_slice(&nulls);
    let objective = ObjectiveVector::focus_with_nulls(focus, &nulls)?;
    let chan_all = acquire_channel(&media, &array, &cells, &pulse_cfg)?;
    let w_multi = lcmp_weights(&chan_all, &objective, false)?;
    println!(
        "  constraint residual |wC - g|_inf = {:.2e}",
        w_multi.residual_inf.unwrap_or(f64::NAN)
    );
    let w_multi = normalize_drive(&w_multi.values);
    let q_multi = run_map(&media, &array, &w_multi, focus)?;

    println!();
    println!("{:<26} {:>14} {:>14} {:>10}", "quantity", "conjugate", "with nulls", "change");
    let tgt_s = q_single[[focus.j, focus.i]];
    let tgt_m = q_multi[[focus.j, focus.i]];
    println!(
        "{:<26} {:>14.4e} {:>14.4e} {:>9.1}%",
        "target-cell Q (W/m^3)",
        tgt_s,
        tgt_m,
        100.0 * (tgt_m / tgt_s - 1.0)
    );
    for (k, &n) in nulls.iter().enumerate() {
        let (qs, qm) = (q_single[[n.j, n.i]], q_multi[[n.j, n.i]]);
        println!(
            "{:<26} {:>14.4e} {:>14.4e} {:>7.1} dB",
            format!("null {} Q (W/m^3)", k),
            qs,
            qm,
            10.0 * (qm / qs).log10()
        );
    }
    let (ps, pm) = (secondary_power(&q_single, &media), secondary_power(&q_multi, &media));
    println!(
        "{:<26} {:>14.4e} {:>14.4e} {:>9.1}%",
        "secondary disk power (W/m)",
        ps,
        pm,
        100.0 * (pm / ps - 1.0)
    );

    ppm::write_heatmap(&out.join("q_conjugate.ppm"), &q_single, None)?;
    ppm::write_heatmap(&out.join("q_with_nulls.ppm"), &q_multi, None)?;
    println!();
    println!("power maps written to {}", out.display());
    Ok(())
}
