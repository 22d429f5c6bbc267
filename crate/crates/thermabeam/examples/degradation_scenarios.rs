//! Static versus adaptive refocusing as tissue properties drift.
//!
//! Walks the canonical 14-step degradation schedule (treatment disk -5% per
//! step, surrounding tissue -2%) over a homogeneous fibroglandular phantom and
//! compares three designs at each step:
//!
//! * `static`  - weights designed once on the pristine baseline, never updated
//! * `ideal`   - weights re-designed each step with full knowledge of the
//!               degraded medium
//! * `partial` - weights re-designed each step, but the acquisition only sees
//!               the tissue-averaged (bulk) properties, not the spatial detail
//!
//! The figure of merit is the power delivered to the target cell relative to
//! step 0. Static designs decay as the stored phases go stale; re-designed
//! weights hold the focus. Per-step curves land in
//! `example-out/degradation_scenarios/`.
//!
//! Run with `cargo run --release -p thermabeam --example degradation_scenarios`.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use thermabeam::beamformer::{design, AntennaArray, DesignMode, ObjectiveVector};
use thermabeam::constants::{CARRIER_HZ, PULSE_BANDWIDTH_HZ};
use thermabeam::em::{heating_potential, run_cw, CwDrive, CwRunConfig, PulseRunConfig, PulseSpec};
use thermabeam::io::csv;
use thermabeam::metrics::{focus_error, power_report, PowerReport};
use thermabeam::phantom::{
    apply_scenario, build_homogeneous, canonical_schedule, ScheduleKind, STANDARD_DISK_RADIUS,
};
use thermabeam::{Cell, Error, GridSpec, MediaMap, Tissue};

fn q_for(media: &MediaMap, drives: &[CwDrive], target: Cell) -> thermabeam::Result<Array2<f64>> {
    let cw = run_cw(media, drives, &CwRunConfig::new(CARRIER_HZ, target))?;
    heating_potential(&cw.observation, media, CARRIER_HZ)
}

fn main() -> thermabeam::Result<()> {
    let out = Path::new("example-out/degradation_scenarios");
    fs::create_dir_all(out).map_err(Error::from)?;

    let grid = GridSpec::square(201, 1e-3)?;
    let baseline =
        build_homogeneous(grid, Tissue::Fibroglandular, STANDARD_DISK_RADIUS, Tissue::Air)?;
    let array = AntennaArray::ring(&grid, 16, 0.07)?;
    let target = grid
        .cell_at(-0.03, 0.0)
        .ok_or_else(|| Error::Geometry("target outside grid".into()))?;
    let objective = ObjectiveVector::new(vec![target], vec![1.0])?;
    let pulse_cfg = PulseRunConfig::new(PulseSpec::new(CARRIER_HZ, PULSE_BANDWIDTH_HZ)?);
    let schedule = canonical_schedule(ScheduleKind::TreatmentAndSurround, 14)?;

    // The static design never changes; compute it once on the baseline.
    let (static_w, _) = design(
        DesignMode::Static,
        &baseline,
        &baseline,
        &array,
        &objective,
        &pulse_cfg,
        false,
    )?;
    let static_drives: Vec<CwDrive> = array
        .cells
        .iter()
        .zip(&static_w.values)
        .map(|(&cell, &weight)| CwDrive { cell, weight })
        .collect();

    let modes = [DesignMode::Static, DesignMode::Ideal, DesignMode::PartialKnowledge];
    let mut curves: Vec<Vec<(f64, f64)>> = vec![Vec::new(); modes.len()];
    let mut step0: Vec<Option<PowerReport>> = vec![None; modes.len()];

    println!(
        "{:>4} {:>10} {:>26} {:>26} {:>26}",
        "step", "treat frac", "static", "ideal", "partial"
    );
    for step in 0..schedule.n_steps() {
        let media = apply_scenario(&baseline, &schedule, step)?;
        print!("{:>4} {:>10.2}", step, schedule.treatment.fractions[step]);
        for (mi, &mode) in modes.iter().enumerate() {
            let drives: Vec<CwDrive> = if mode == DesignMode::Static {
                static_drives.clone()
            } else {
                let (w, _) = design(mode, &media, &baseline, &array, &objective, &pulse_cfg, false)?;
                array
                    .cells
                    .iter()
                    .zip(&w.values)
                    .map(|(&cell, &weight)| CwDrive { cell, weight })
                    .collect()
            };
            let q = q_for(&media, &drives, target)?;
            let report = power_report(&q, &media, target, step0[mi].as_ref())?;
            if step == 0 {
                step0[mi] = Some(report);
            }
            let ratio = report.target_ratio.unwrap_or(1.0);
            let offset = focus_error(&q, &media, target)?.distance_cells;
            print!("{:>19.3} ({:>4.1} cells)", ratio, offset);
            curves[mi].push((step as f64, ratio));
        }
        println!();
    }

    for (mi, &mode) in modes.iter().enumerate() {
        csv::write_series(
            &out.join(format!("target_ratio_{}.csv", mode.name())),
            ("step", "target_power_ratio"),
            &curves[mi],
        )?;
    }
    let last = schedule.n_steps() - 1;
    println!();
    println!(
        "endpoint target power vs step 0: static {:.2}, ideal {:.2}, partial {:.2}",
        curves[0][last].1, curves[1][last].1, curves[2][last].1
    );
    println!("curves written to {}", out.display());
    Ok(())
}
