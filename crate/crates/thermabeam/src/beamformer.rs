//! Near-field transmit-array synthesis from simulated channel soundings.
//!
//! The channel is acquired by reciprocity: a pulse is launched *from* each
//! objective cell and recorded at every antenna; the single-frequency content
//! of those recordings forms one column of the channel matrix. Weights are
//! then either the per-element phase conjugate (single focus) or the
//! linearly-constrained minimum-power solution `w = g^H (C^H C)^{-1} C^H`
//! (focus-plus-null sets), optionally projected to unit amplitudes.

use crate::em::{run_pulse, PulseRunConfig};
use crate::error::{Error, Result};
use crate::grid::{Cell, GridSpec};
use crate::media::MediaMap;
use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;

/// How a design call chooses its acquisition medium.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DesignMode {
    /// Acquire once on the pristine baseline medium and never update.
    Static,
    /// Re-acquire on the true (possibly degraded) medium.
    Ideal,
    /// Re-acquire on a homogenised copy of the true medium: every tissue
    /// cell carries the spatial average of the true tissue properties.
    PartialKnowledge,
}

impl DesignMode {
    pub fn name(self) -> &'static str {
        match self {
            DesignMode::Static => "static",
            DesignMode::Ideal => "ideal",
            DesignMode::PartialKnowledge => "partial-knowledge",
        }
    }
}

/// Antenna positions, as grid cells, with a designated reference element.
#[derive(Clone, Debug)]
pub struct AntennaArray {
    pub cells: Vec<Cell>,
    /// Index whose recording normalizes every channel column; element 0 of a
    /// ring sits at angle zero (+x axis).
    pub reference: usize,
}

impl AntennaArray {
    /// Evenly spaced ring of `elements` antennas at `radius` metres from the
    /// grid centre, element `k` at angle `2 pi k / elements` from +x.
    pub fn ring(grid: &GridSpec, elements: usize, radius: f64) -> Result<AntennaArray> {
        if elements < 2 {
            return Err(Error::Config(format!(
                "antenna ring needs at least 2 elements, got {elements}"
            )));
        }
        if !(radius > 0.0) {
            return Err(Error::Config(format!("ring radius must be positive, got {radius}")));
        }
        let mut cells = Vec::with_capacity(elements);
        for k in 0..elements {
            let th = 2.0 * std::f64::consts::PI * k as f64 / elements as f64;
            let (x, y) = (radius * th.cos(), radius * th.sin());
            let cell = grid.cell_at(x, y).ok_or_else(|| {
                Error::Geometry(format!(
                    "antenna {k} at ({x:.4}, {y:.4}) m falls outside the domain; \
                     shrink the ring or enlarge the grid"
                ))
            })?;
            if grid.in_pml(cell) {
                return Err(Error::Geometry(format!(
                    "antenna {k} at ({x:.4}, {y:.4}) m lands inside the absorbing \
                     boundary layer; shrink the ring or enlarge the grid"
                )));
            }
            if let Some(prev) = cells.iter().position(|&c| c == cell) {
                return Err(Error::Geometry(format!(
                    "antennas {prev} and {k} collapse onto the same cell ({}, {}); \
                     the grid is too coarse for {elements} elements at r = {radius} m",
                    cell.i, cell.j
                )));
            }
            cells.push(cell);
        }
        Ok(AntennaArray { cells, reference: 0 })
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

/// Per-antenna, per-objective complex channel entries, each column scaled so
/// the reference antenna reads exactly `1 + 0j`.
#[derive(Clone, Debug)]
pub struct ChannelMatrix {
    /// N antennas x M objectives.
    pub entries: DMatrix<Complex64>,
    pub antennas: Vec<Cell>,
    pub objectives: Vec<Cell>,
    pub reference: usize,
    pub carrier_hz: f64,
}

impl ChannelMatrix {
    pub fn n_antennas(&self) -> usize {
        self.entries.nrows()
    }

    pub fn n_objectives(&self) -> usize {
        self.entries.ncols()
    }

    pub fn column(&self, m: usize) -> Vec<Complex64> {
        self.entries.column(m).iter().copied().collect()
    }

    /// Restrict to a subset of antenna rows (for element-count sweeps over
    /// nested rings). The reference element must survive the cut.
    pub fn subset_antennas(&self, keep: &[usize]) -> Result<ChannelMatrix> {
        let new_ref = keep
            .iter()
            .position(|&k| k == self.reference)
            .ok_or_else(|| {
                Error::Config(format!(
                    "antenna subset must retain the reference element {}",
                    self.reference
                ))
            })?;
        let mut antennas = Vec::with_capacity(keep.len());
        for &k in keep {
            if k >= self.n_antennas() {
                return Err(Error::Config(format!(
                    "antenna index {k} out of range for an {}-element channel",
                    self.n_antennas()
                )));
            }
            antennas.push(self.antennas[k]);
        }
        let entries = DMatrix::from_fn(keep.len(), self.n_objectives(), |r, c| {
            self.entries[(keep[r], c)]
        });
        Ok(ChannelMatrix {
            entries,
            antennas,
            objectives: self.objectives.clone(),
            reference: new_ref,
            carrier_hz: self.carrier_hz,
        })
    }
}

/// Sound the channel: one transient run per objective, all antennas probed.
pub fn acquire_channel(
    media: &MediaMap,
    array: &AntennaArray,
    objectives: &[Cell],
    cfg: &PulseRunConfig,
) -> Result<ChannelMatrix> {
    let n = array.len();
    let m = objectives.len();
    if m == 0 {
        return Err(Error::Config("channel acquisition needs at least one objective".into()));
    }
    if m > n.saturating_sub(1) {
        return Err(Error::Config(format!(
            "{m} objectives need at least {} antennas (one spare element), got {n}",
            m + 1
        )));
    }
    if array.reference >= n {
        return Err(Error::Config(format!(
            "reference antenna index {} out of range for {n} elements",
            array.reference
        )));
    }
    for (k, &obj) in objectives.iter().enumerate() {
        if !media.grid().contains(obj) {
            return Err(Error::Geometry(format!(
                "objective {k} at ({}, {}) lies outside the grid",
                obj.i, obj.j
            )));
        }
        if !media.is_tissue(obj) {
            return Err(Error::Geometry(format!(
                "objective {k} at ({}, {}) is not inside tissue",
                obj.i, obj.j
            )));
        }
        if objectives[..k].contains(&obj) {
            return Err(Error::Config(format!(
                "objective {k} duplicates an earlier objective cell ({}, {})",
                obj.i, obj.j
            )));
        }
    }
    let columns: Vec<Result<Vec<Complex64>>> = objectives
        .par_iter()
        .enumerate()
        .map(|(mi, &obj)| -> Result<Vec<Complex64>> {
            let run = run_pulse(media, obj, &array.cells, cfg)?;
            if !run.decayed {
                return Err(Error::Acquisition(format!(
                    "sounding from objective {mi} did not ring down within {} steps; \
                     the spectral estimate would be truncated",
                    cfg.max_steps
                )));
            }
            let col: Vec<Complex64> = run
                .recordings
                .iter()
                .map(|r| r.phasor_at(cfg.pulse.carrier_hz))
                .collect();
            let max_mag = col.iter().fold(0.0f64, |a, c| a.max(c.norm()));
            if max_mag <= f64::MIN_POSITIVE {
                return Err(Error::Acquisition(format!(
                    "all recordings from objective {mi} are zero; no propagation path \
                     reaches the array"
                )));
            }
            let r = col[array.reference];
            if r.norm() < 1e-9 * max_mag {
                return Err(Error::Acquisition(format!(
                    "reference antenna {} sits in a null of objective {mi} \
                     (|entry| = {:.3e} vs column max {:.3e}); pick another reference",
                    array.reference,
                    r.norm(),
                    max_mag
                )));
            }
            let mut col: Vec<Complex64> = col.iter().map(|c| c / r).collect();
            col[array.reference] = Complex64::new(1.0, 0.0);
            Ok(col)
        })
        .collect();
    let mut entries = DMatrix::zeros(n, m);
    for (mi, col) in columns.into_iter().enumerate() {
        let col = col?;
        for (ni, v) in col.into_iter().enumerate() {
            entries[(ni, mi)] = v;
        }
    }
    Ok(ChannelMatrix {
        entries,
        antennas: array.cells.clone(),
        objectives: objectives.to_vec(),
        reference: array.reference,
        carrier_hz: cfg.pulse.carrier_hz,
    })
}

/// Focus/null labelling of the channel's objectives.
#[derive(Clone, Debug)]
pub struct ObjectiveVector {
    pub cells: Vec<Cell>,
    /// 1 = focus, 0 = null.
    pub gains: Vec<f64>,
}

impl ObjectiveVector {
    pub fn new(cells: Vec<Cell>, gains: Vec<f64>) -> Result<ObjectiveVector> {
        if cells.len() != gains.len() {
            return Err(Error::Config(format!(
                "{} objective cells but {} gains",
                cells.len(),
                gains.len()
            )));
        }
        if gains.is_empty() {
            return Err(Error::Config("objective vector must not be empty".into()));
        }
        for (k, &g) in gains.iter().enumerate() {
            if g != 0.0 && g != 1.0 {
                return Err(Error::Config(format!(
                    "objective gain {k} must be exactly 0 (null) or 1 (focus), got {g}"
                )));
            }
        }
        if !gains.contains(&1.0) {
            return Err(Error::Config("objective vector needs at least one focus entry".into()));
        }
        Ok(ObjectiveVector { cells, gains })
    }

    /// One focus followed by any number of nulls.
    pub fn focus_with_nulls(focus: Cell, nulls: &[Cell]) -> Result<ObjectiveVector> {
        let mut cells = vec![focus];
        cells.extend_from_slice(nulls);
        let mut gains = vec![1.0];
        gains.extend(std::iter::repeat(0.0).take(nulls.len()));
        Self::new(cells, gains)
    }

    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }
}

/// Complex per-antenna transmit weights.
#[derive(Clone, Debug)]
pub struct BeamformerWeights {
    pub values: Vec<Complex64>,
    pub phase_only: bool,
    pub mode: DesignMode,
    /// Solution before any phase-only projection (equals `values` otherwise).
    pub pre_projection: Vec<Complex64>,
    /// `max_m |(w C)_m - g_m|` evaluated at `values`; `None` for conjugate
    /// designs, which have no constraint system.
    pub residual_inf: Option<f64>,
}

impl BeamformerWeights {
    pub fn with_mode(mut self, mode: DesignMode) -> Self {
        self.mode = mode;
        self
    }
}

/// Per-element phase conjugation: `w_k = conj(c_k) / |c_k|`.
pub fn conjugate_weights(chan: &ChannelMatrix) -> Result<BeamformerWeights> {
    if chan.n_objectives() != 1 {
        return Err(Error::Config(format!(
            "phase-conjugate synthesis takes exactly one objective, got {}",
            chan.n_objectives()
        )));
    }
    let mut values = Vec::with_capacity(chan.n_antennas());
    for (k, c) in chan.entries.column(0).iter().enumerate() {
        let mag = c.norm();
        if mag <= f64::MIN_POSITIVE {
            return Err(Error::Acquisition(format!(
                "channel entry for antenna {k} has zero magnitude; \
                 conjugate phasing is undefined"
            )));
        }
        values.push(c.conj() / mag);
    }
    Ok(BeamformerWeights {
        pre_projection: values.clone(),
        values,
        phase_only: true,
        mode: DesignMode::Ideal,
        residual_inf: None,
    })
}

fn residual_inf(entries: &DMatrix<Complex64>, w: &[Complex64], gains: &[f64]) -> f64 {
    (0..entries.ncols())
        .map(|m| {
            let resp: Complex64 = (0..entries.nrows())
                .map(|k| w[k] * entries[(k, m)])
                .sum();
            (resp - Complex64::new(gains[m], 0.0)).norm()
        })
        .fold(0.0, f64::max)
}

/// Most-correlated column pair, for diagnosing near-dependent constraints.
fn worst_column_pair(entries: &DMatrix<Complex64>) -> (usize, usize) {
    let m = entries.ncols();
    let mut best = (0, 1.min(m - 1));
    let mut best_corr = -1.0;
    for a in 0..m {
        for b in a + 1..m {
            let ca = entries.column(a);
            let cb = entries.column(b);
            let dot: Complex64 = ca.iter().zip(cb.iter()).map(|(x, y)| x.conj() * y).sum();
            let na: f64 = ca.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            let nb: f64 = cb.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            let corr = dot.norm() / (na * nb).max(f64::MIN_POSITIVE);
            if corr > best_corr {
                best_corr = corr;
                best = (a, b);
            }
        }
    }
    best
}

fn one_norm(m: &DMatrix<Complex64>) -> f64 {
    (0..m.ncols())
        .map(|c| m.column(c).iter().map(|v| v.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Reciprocal condition estimate below which constraint sets are rejected.
pub const RCOND_THRESHOLD: f64 = 1e-10;

/// Linearly constrained weights `w = g^H (C^H C)^{-1} C^H`, satisfying
/// `w C = g^H`. With `phase_only` the solution is afterwards projected to
/// unit amplitudes, and the residual reports the resulting constraint error.
pub fn lcmp_weights(
    chan: &ChannelMatrix,
    objective: &ObjectiveVector,
    phase_only: bool,
) -> Result<BeamformerWeights> {
    let n = chan.n_antennas();
    let m = chan.n_objectives();
    if objective.len() != m {
        return Err(Error::Config(format!(
            "objective vector has {} entries but the channel has {m} columns",
            objective.len()
        )));
    }
    if objective.cells != chan.objectives {
        return Err(Error::Config(
            "objective cells do not match the cells the channel was acquired for".into(),
        ));
    }
    if m > n - 1 {
        return Err(Error::Config(format!(
            "{m} constraints need at least {} antennas, got {n}",
            m + 1
        )));
    }
    let c = &chan.entries;
    let gram = c.adjoint() * c;
    let inv = gram.clone().try_inverse();
    let rcond = match &inv {
        Some(ginv) => 1.0 / (one_norm(&gram) * one_norm(ginv)).max(f64::MIN_POSITIVE),
        None => 0.0,
    };
    if rcond < RCOND_THRESHOLD {
        let (a, b) = worst_column_pair(c);
        return Err(Error::IllConditioned {
            rcond,
            col_a: a,
            col_b: b,
        });
    }
    let ginv = inv.expect("checked above");
    let g = DVector::from_iterator(m, objective.gains.iter().map(|&x| Complex64::new(x, 0.0)));
    // w (row) = g^H Ginv C^H  ==  conj of v = C Ginv g, elementwise
    let mut v = c * (&ginv * &g);
    // one refinement pass keeps the constraint identity near machine level
    // even for grudgingly accepted condition numbers
    let resp = c.adjoint() * &v; // conj of achieved response
    let err = &g - DVector::from_iterator(m, resp.iter().map(|r| r.conj()));
    v += c * (&ginv * DVector::from_iterator(m, err.iter().map(|e| e.conj())));
    let pre: Vec<Complex64> = v.iter().map(|x| x.conj()).collect();
    let values = if phase_only {
        let mut out = Vec::with_capacity(n);
        for (k, w) in pre.iter().enumerate() {
            let mag = w.norm();
            if mag <= f64::MIN_POSITIVE {
                return Err(Error::Config(format!(
                    "element {k} carries zero weight; phase-only projection is undefined"
                )));
            }
            out.push(w / mag);
        }
        out
    } else {
        pre.clone()
    };
    let residual = residual_inf(c, &values, &objective.gains);
    Ok(BeamformerWeights {
        values,
        phase_only,
        mode: DesignMode::Ideal,
        pre_projection: pre,
        residual_inf: Some(residual),
    })
}

/// Homogenise tissue: every tissue cell receives the arithmetic per-field
/// mean of the Debye parameters over `region`; bath cells are untouched.
pub fn spatial_average_media(media: &MediaMap, region: &Array2<bool>) -> Result<MediaMap> {
    let grid = media.grid();
    if region.dim() != (grid.ny, grid.nx) {
        return Err(Error::Config(format!(
            "averaging region is {:?}, grid needs ({}, {})",
            region.dim(),
            grid.ny,
            grid.nx
        )));
    }
    let mut sums = [0.0f64; 4];
    let mut count = 0usize;
    for c in media.cells() {
        if region[(c.j, c.i)] {
            let d = media.debye_at(c);
            sums[0] += d.eps_inf;
            sums[1] += d.delta_eps;
            sums[2] += d.sigma_s;
            sums[3] += d.tau;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Config("averaging region contains no cells".into()));
    }
    let kf = count as f64;
    let mean = crate::tissue::DebyeParams {
        eps_inf: sums[0] / kf,
        delta_eps: sums[1] / kf,
        sigma_s: sums[2] / kf,
        tau: sums[3] / kf,
    };
    mean.validate()?;
    let mut out = media.clone();
    for c in media.cells() {
        if media.is_tissue(c) {
            out.set_debye(c, mean)?;
        }
    }
    Ok(out)
}

/// Full design call: choose the acquisition medium from `mode`, sound the
/// channel, and synthesize weights (conjugate for one objective, constrained
/// otherwise). Returns the weights together with the channel they came from.
#[allow(clippy::too_many_arguments)]
pub fn design(
    mode: DesignMode,
    true_media: &MediaMap,
    baseline_media: &MediaMap,
    array: &AntennaArray,
    objective: &ObjectiveVector,
    cfg: &PulseRunConfig,
    phase_only: bool,
) -> Result<(BeamformerWeights, ChannelMatrix)> {
    let averaged;
    let acquisition_media = match mode {
        DesignMode::Static => baseline_media,
        DesignMode::Ideal => true_media,
        DesignMode::PartialKnowledge => {
            averaged = spatial_average_media(true_media, &true_media.tissue_mask())?;
            &averaged
        }
    };
    let chan = acquire_channel(acquisition_media, array, &objective.cells, cfg)?;
    let weights = if chan.n_objectives() == 1 {
        conjugate_weights(&chan)?
    } else {
        lcmp_weights(&chan, objective, phase_only)?
    };
    Ok((weights.with_mode(mode), chan))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tissue::Tissue;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn test_channel(entries: DMatrix<Complex64>, objectives: usize) -> ChannelMatrix {
        let n = entries.nrows();
        ChannelMatrix {
            entries,
            antennas: (0..n).map(|k| Cell::new(20 + k, 20)).collect(),
            objectives: (0..objectives).map(|m| Cell::new(50, 50 + m)).collect(),
            reference: 0,
            carrier_hz: 2.5e9,
        }
    }

    fn random_channel(rng: &mut ChaCha8Rng, n: usize, m: usize) -> ChannelMatrix {
        let entries = DMatrix::from_fn(n, m, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        test_channel(entries, m)
    }

    #[test]
    fn ring_placement_and_failure_modes() {
        let grid = GridSpec::square(201, 1e-3).unwrap();
        let ring = AntennaArray::ring(&grid, 16, 0.07).unwrap();
        assert_eq!(ring.len(), 16);
        // the reference sits on the +x axis
        let (x, y) = grid.cell_center(ring.cells[0]);
        assert!((x - 0.07).abs() < 1e-3 && y.abs() < 1e-3);
        // all on the ring radius to within a cell diagonal
        for &c in &ring.cells {
            let (x, y) = grid.cell_center(c);
            assert!(((x * x + y * y).sqrt() - 0.07).abs() < 1.5e-3);
        }
        assert!(AntennaArray::ring(&grid, 16, 0.3).is_err(), "outside the domain");
        assert!(AntennaArray::ring(&grid, 16, 0.099).is_err(), "inside the absorber");
        assert!(AntennaArray::ring(&grid, 400, 0.07).is_err(), "cells collapse");
        assert!(AntennaArray::ring(&grid, 1, 0.07).is_err(), "single element");
    }

    #[test]
    fn conjugate_of_unit_channel_is_unit() {
        let chan = test_channel(DMatrix::from_element(8, 1, Complex64::new(1.0, 0.0)), 1);
        let w = conjugate_weights(&chan).unwrap();
        assert!(w.phase_only);
        for v in &w.values {
            assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn conjugate_gain_is_coherent_and_optimal() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let chan = random_channel(&mut rng, 12, 1);
        let w = conjugate_weights(&chan).unwrap();
        let c = chan.column(0);
        let coherent: Complex64 = w.values.iter().zip(&c).map(|(w, c)| w * c).sum();
        let expect: f64 = c.iter().map(|x| x.norm()).sum();
        assert!((coherent.re - expect).abs() < 1e-12 && coherent.im.abs() < 1e-12);
        // no unit-phase competitor beats the conjugate match
        for _ in 0..1000 {
            let u: Complex64 = w
                .values
                .iter()
                .zip(&c)
                .map(|(_, c)| {
                    let th = rng.gen_range(0.0..(2.0 * std::f64::consts::PI));
                    Complex64::from_polar(1.0, th) * c
                })
                .sum();
            assert!(u.norm() <= coherent.norm() + 1e-9);
        }
    }

    #[test]
    fn conjugate_rejects_dead_elements() {
        let mut entries = DMatrix::from_element(8, 1, Complex64::new(1.0, 0.0));
        entries[(3, 0)] = Complex64::new(0.0, 0.0);
        let err = conjugate_weights(&test_channel(entries, 1)).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().contains("antenna 3"));
    }

    #[test]
    fn lcmp_orthonormal_columns_reduce_to_conjugate_row() {
        // two orthonormal columns: w must be the first column's adjoint
        let mut entries = DMatrix::zeros(4, 2);
        entries[(0, 0)] = Complex64::new(1.0, 0.0);
        entries[(1, 1)] = Complex64::new(0.0, 1.0);
        let chan = test_channel(entries, 2);
        let obj = ObjectiveVector::new(chan.objectives.clone(), vec![1.0, 0.0]).unwrap();
        let w = lcmp_weights(&chan, &obj, false).unwrap();
        assert!((w.values[0] - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        for k in 1..4 {
            assert!(w.values[k].norm() < 1e-14);
        }
        assert!(w.residual_inf.unwrap() < 1e-14);
    }

    #[test]
    fn lcmp_satisfies_constraints_to_machine_level() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..50 {
            let chan = random_channel(&mut rng, 16, 5);
            let obj = ObjectiveVector::new(
                chan.objectives.clone(),
                vec![1.0, 0.0, 0.0, 1.0, 0.0],
            )
            .unwrap();
            let w = lcmp_weights(&chan, &obj, false).unwrap();
            assert!(
                w.residual_inf.unwrap() <= 1e-10,
                "trial {trial}: residual {:.3e}",
                w.residual_inf.unwrap()
            );
        }
    }

    #[test]
    fn lcmp_single_focus_phases_match_conjugate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let chan = random_channel(&mut rng, 10, 1);
        let obj = ObjectiveVector::new(chan.objectives.clone(), vec![1.0]).unwrap();
        let lc = lcmp_weights(&chan, &obj, false).unwrap();
        let cj = conjugate_weights(&chan).unwrap();
        for (a, b) in lc.values.iter().zip(&cj.values) {
            // same phase, different (non-unit) magnitude
            let phase_diff = (a * b.conj()).arg();
            assert!(phase_diff.abs() < 1e-10, "phase gap {phase_diff}");
        }
    }

    #[test]
    fn duplicate_columns_are_rejected_with_names() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut chan = random_channel(&mut rng, 8, 3);
        let dup = chan.entries.column(0).into_owned();
        chan.entries.set_column(2, &dup);
        let obj = ObjectiveVector::new(chan.objectives.clone(), vec![1.0, 0.0, 0.0]).unwrap();
        let err = lcmp_weights(&chan, &obj, false).unwrap_err();
        match err {
            Error::IllConditioned { rcond, col_a, col_b } => {
                assert!(rcond < 1e-10);
                assert_eq!((col_a, col_b), (0, 2), "the duplicated pair is named");
            }
            other => panic!("expected ill-conditioned, got {other}"),
        }
    }

    #[test]
    fn phase_only_projection_flags_and_unit_magnitudes() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let chan = random_channel(&mut rng, 12, 3);
        let obj = ObjectiveVector::new(chan.objectives.clone(), vec![1.0, 0.0, 0.0]).unwrap();
        let w = lcmp_weights(&chan, &obj, true).unwrap();
        assert!(w.phase_only);
        for v in &w.values {
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
        // projection costs constraint accuracy; the residual must say so
        let exact = lcmp_weights(&chan, &obj, false).unwrap();
        assert!(w.residual_inf.unwrap() > exact.residual_inf.unwrap());
        // pre-projection copy preserves the exact solution's phases
        for (p, e) in w.pre_projection.iter().zip(&exact.values) {
            assert!((p - e).norm() < 1e-9);
        }
    }

    #[test]
    fn global_phase_rotation_shifts_all_weight_phases_equally() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let chan = random_channel(&mut rng, 10, 1);
        let mut rotated = chan.clone();
        let rot = Complex64::from_polar(1.0, 0.7);
        rotated.entries.iter_mut().for_each(|e| *e *= rot);
        let w0 = conjugate_weights(&chan).unwrap();
        let w1 = conjugate_weights(&rotated).unwrap();
        for (a, b) in w0.values.iter().zip(&w1.values) {
            let rel = a * b.conj(); // should be the constant rotation
            assert!((rel - rot).norm() < 1e-12);
        }
    }

    #[test]
    fn objective_vector_validation() {
        let c = |k: usize| Cell::new(50 + k, 50);
        assert!(ObjectiveVector::new(vec![c(0)], vec![0.5]).is_err(), "fractional gain");
        assert!(ObjectiveVector::new(vec![c(0)], vec![0.0]).is_err(), "no focus");
        assert!(ObjectiveVector::new(vec![c(0), c(1)], vec![1.0]).is_err(), "length gap");
        let ov = ObjectiveVector::focus_with_nulls(c(0), &[c(1), c(2)]).unwrap();
        assert_eq!(ov.gains, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn averaging_blends_scaled_and_pristine_halves() {
        let grid = GridSpec::square(101, 1e-3).unwrap();
        let mut media = MediaMap::immersed(grid, Tissue::Water).unwrap();
        media.paint_disk((0.0, 0.0), 0.02, Tissue::Fibroglandular).unwrap();
        // scale the y>0 half of the disk to 0.5
        let tissue: Vec<Cell> = media.tissue_cells().collect();
        let mut scaled = 0usize;
        let mut total = 0usize;
        for c in &tissue {
            total += 1;
            let (_, y) = grid.cell_center(*c);
            if y > 0.0 {
                let d = media.debye_at(*c).scaled(0.5).unwrap();
                media.set_debye(*c, d).unwrap();
                scaled += 1;
            }
        }
        let avg = spatial_average_media(&media, &media.tissue_mask()).unwrap();
        // the painted disk straddles y=0 symmetrically minus the centre row
        let frac = (total - scaled) as f64 / total as f64 + 0.5 * scaled as f64 / total as f64;
        let expect_sigma = Tissue::Fibroglandular.debye().sigma_s * frac;
        let got = avg.debye_at(Cell::new(50, 50)).sigma_s;
        assert!(
            (got - expect_sigma).abs() < 1e-12,
            "mean sigma {got} vs {expect_sigma}"
        );
        // bath cells untouched
        assert_eq!(avg.debye_at(Cell::new(5, 5)), Tissue::Water.debye());
        // idempotence up to summation rounding: re-averaging a uniform region
        let again = spatial_average_media(&avg, &avg.tissue_mask()).unwrap();
        let (a, b) = (again.debye_at(Cell::new(50, 50)), avg.debye_at(Cell::new(50, 50)));
        assert!((a.sigma_s - b.sigma_s).abs() < 1e-12 * b.sigma_s.abs());
        assert!((a.eps_inf - b.eps_inf).abs() < 1e-12 * b.eps_inf);
        assert!((a.delta_eps - b.delta_eps).abs() < 1e-12 * b.delta_eps);
        // empty region is refused
        let empty = Array2::from_elem((grid.ny, grid.nx), false);
        assert!(spatial_average_media(&media, &empty).is_err());
    }

    #[test]
    fn antenna_subsetting_keeps_reference_and_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let chan = random_channel(&mut rng, 8, 2);
        let sub = chan.subset_antennas(&[0, 2, 4, 6]).unwrap();
        assert_eq!(sub.n_antennas(), 4);
        assert_eq!(sub.reference, 0);
        assert_eq!(sub.entries[(1, 1)], chan.entries[(2, 1)]);
        assert!(chan.subset_antennas(&[1, 3, 5]).is_err(), "reference dropped");
    }
}
