//! End-to-end runs of the batch scenario pipeline: bundle layout, manifest
//! integrity, determinism, the thermal stage, and run comparison.

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thermabeam::scenario::{
    compare_runs, run_scenario, ScenarioConfig, ScheduleSection, ThermalSection,
};

fn schedules_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../schedules")
        .canonicalize()
        .unwrap()
}

/// Small but complete testbed: 151 mm square grid, fibroglandular disk in
/// water, 8-element ring, off-centre focus.
fn small_config() -> ScenarioConfig {
    let cfg: ScenarioConfig = toml::from_str(
        r#"
        [grid]
        n = 151
        [phantom]
        kind = "homogeneous"
        tissue = "fibroglandular"
        radius = 0.035
        immersion = "water"
        [array]
        elements = 8
        radius = 0.055
        [objectives]
        focus = [-0.015, 0.0]
        "#,
    )
    .unwrap();
    cfg.validate().unwrap();
    cfg
}

fn sha256_file(path: &Path) -> String {
    let bytes = std::fs::read(path).unwrap();
    let mut h = Sha256::new();
    h.update(&bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[test]
fn schedule_bundle_is_complete_and_deterministic() {
    let mut cfg = small_config();
    cfg.schedule = Some(ScheduleSection {
        path: schedules_dir().join("treatment-surround.toml"),
        steps: Some(vec![0, 13]),
    });

    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    let run_a = run_scenario(&cfg, &out_a, 2).unwrap();
    run_scenario(&cfg, &out_b, 2).unwrap();

    assert_eq!(run_a.summary.steps.len(), 2);
    let s13 = &run_a.summary.steps[1];
    assert_eq!(s13.step, 13);
    assert!(s13.settled, "continuous-wave run did not settle");
    let vs = s13.vs_step0.as_ref().expect("baseline normalization ratios");
    assert!(vs.target_ratio.unwrap() > 0.0);

    // Bundle layout.
    for f in [
        "effective-config.toml",
        "phantom.hfgm",
        "phantom.ppm",
        "summary.json",
        "manifest.json",
        "runlog.json",
        "step-00/media.hfgm",
        "step-00/weights.csv",
        "step-00/channel.csv",
        "step-00/q.hfgm",
        "step-00/q.ppm",
        "step-00/q_slice.csv",
        "step-00/focal_mask.ppm",
        "step-00/report.json",
        "step-13/q.hfgm",
        "step-13/report.json",
    ] {
        assert!(out_a.join(f).exists(), "missing bundle file {f}");
    }

    // Manifest completeness: every listed file exists and hashes match.
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_a.join("manifest.json")).unwrap())
            .unwrap();
    let files = manifest["files"].as_array().unwrap();
    assert!(files.len() >= 16);
    for f in files {
        let rel = f["path"].as_str().unwrap();
        let path = out_a.join(rel);
        assert!(path.exists(), "manifest references missing file {rel}");
        assert_eq!(
            sha256_file(&path),
            f["sha256"].as_str().unwrap(),
            "hash mismatch for {rel}"
        );
    }

    // Determinism: both bundles hash identically file by file (runlog and its
    // wall-clock times are deliberately outside the manifest).
    let manifest_b: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_b.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(
        manifest["files"], manifest_b["files"],
        "bundles differ between identical runs"
    );

    // A run compared with its twin shows unit ratios and full overlap.
    let cmp = compare_runs(&out_a, &out_b).unwrap();
    assert_eq!(cmp.target_ratio, 1.0);
    assert_eq!(cmp.treatment_ratio, 1.0);
    assert_eq!(cmp.total_ratio, 1.0);
    assert_eq!(cmp.contour_overlap, 1.0);
    assert_eq!(cmp.focus_error_a, cmp.focus_error_b);
    assert_eq!(cmp.per_step_target_ratio, Some(vec![1.0, 1.0]));
}

#[test]
fn thermal_stage_calibrates_to_the_requested_temperature() {
    let mut cfg = small_config();
    cfg.thermal = Some(ThermalSection {
        target_temp: Some(42.0),
        scale: None,
        max_time: 14_400.0,
        steady_tol: 1e-4,
        thresholds: vec![40.0, 42.0],
    });
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let run = run_scenario(&cfg, &out, 1).unwrap();
    let rec = run.summary.steps[0]
        .thermal
        .as_ref()
        .expect("thermal record");
    assert!(rec.calibrated && rec.scale > 0.0);
    assert!(
        (rec.temp_at_target - 42.0).abs() < 0.1,
        "target settled at {} degC",
        rec.temp_at_target
    );
    assert!(rec.peak_temp >= rec.temp_at_target);
    assert!(rec.baseline_peak_temp.unwrap() < 40.0);
    for f in [
        "step-00/temperature.hfgm",
        "step-00/temperature.ppm",
        "step-00/temperature-above-40.ppm",
        "step-00/temperature-above-42.ppm",
    ] {
        assert!(out.join(f).exists(), "missing thermal artifact {f}");
    }
    let temp = run.steps[0].temperature.as_ref().unwrap();
    let peak = temp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    assert!((peak - rec.peak_temp).abs() < 1e-9);
}

#[test]
fn missing_schedule_file_names_the_failing_stage() {
    let mut cfg = small_config();
    cfg.schedule = Some(ScheduleSection {
        path: PathBuf::from("/nonexistent/schedule.toml"),
        steps: None,
    });
    let dir = tempfile::tempdir().unwrap();
    let err = run_scenario(&cfg, &dir.path().join("x"), 1).unwrap_err();
    assert!(
        err.to_string().contains("stage 'schedule'"),
        "error does not name the stage: {err}"
    );
    assert_eq!(err.exit_code(), 4, "missing file is an I/O failure");
    // Partial outputs persist: the effective config was already written.
    assert!(dir.path().join("x/effective-config.toml").exists());
}

#[test]
fn comparison_refuses_mismatched_grids() {
    use ndarray::Array2;
    use thermabeam::io::hfgm;
    use thermabeam::GridSpec;

    let dir = tempfile::tempdir().unwrap();
    let fake = |name: &str, n: usize| -> PathBuf {
        let root = dir.path().join(name);
        std::fs::create_dir_all(root.join("step-00")).unwrap();
        let grid = GridSpec::square(n, 1e-3).unwrap();
        let q = Array2::from_elem((n, n), 1.0);
        hfgm::write_plane(&root.join("step-00/q.hfgm"), &grid, &q).unwrap();
        std::fs::write(
            root.join("summary.json"),
            r#"{
              "seed": 0,
              "normalization": "none",
              "target_cell": { "i": 1, "j": 1 },
              "steps": [{
                "step": 0,
                "mode": "ideal",
                "settled": true,
                "periods_run": 1,
                "power": { "total_media": 1.0, "treatment_region": 1.0,
                           "target_cell": 1.0, "total_ratio": null,
                           "treatment_ratio": null, "target_ratio": null },
                "focus": { "peak": { "i": 1, "j": 1 },
                           "distance_cells": 0.0, "tied_cells": 1 }
              }]
            }"#,
        )
        .unwrap();
        root
    };
    let a = fake("a", 31);
    let b = fake("b", 41);
    let err = compare_runs(&a, &b).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("grids differ"), "{err}");
}
