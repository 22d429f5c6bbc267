//! Phantom builders and heating-degradation schedules.
//!
//! Builders produce the standard testbeds: a homogeneous tissue disk, a
//! two-inclusion fat/fibroglandular model, a seeded generator of scattered
//! fibroglandular phantoms, and ingestion of externally supplied maps.
//! A [`ScenarioSchedule`] describes how Debye parameters degrade region by
//! region while tissue heats; [`apply_scenario`] stamps one step of such a
//! schedule onto a base map.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Cell, GridSpec};
use crate::media::MediaMap;
use crate::tissue::Tissue;

/// Homogeneous tissue disk centred in the domain.
pub fn build_homogeneous(
    grid: GridSpec,
    tissue: Tissue,
    radius: f64,
    immersion: Tissue,
) -> Result<MediaMap> {
    if !matches!(tissue, Tissue::Fat | Tissue::Fibroglandular) {
        return Err(Error::Config(format!(
            "homogeneous phantom tissue must be fat or fibroglandular, got {}",
            tissue.name()
        )));
    }
    let mut media = MediaMap::immersed(grid, immersion)?;
    media.paint_disk((0.0, 0.0), radius, tissue)?;
    Ok(media)
}

/// Radius of the standard homogeneous disk, metres.
pub const STANDARD_DISK_RADIUS: f64 = 0.06;

/// A 12 cm fatty disk holding two 2 cm-radius fibroglandular inclusions at
/// (-3 cm, 0) and (+3 cm, 0), immersed in water.
pub fn build_two_inclusion(grid: GridSpec) -> Result<MediaMap> {
    let mut media = MediaMap::immersed(grid, Tissue::Water)?;
    media.paint_disk((0.0, 0.0), STANDARD_DISK_RADIUS, Tissue::Fat)?;
    media.paint_disk((-0.03, 0.0), 0.02, Tissue::Fibroglandular)?;
    media.paint_disk((0.03, 0.0), 0.02, Tissue::Fibroglandular)?;
    Ok(media)
}

/// Load an externally produced (e.g. imaging-derived) phantom from the
/// binary grid format. Water immersion is required, matching the treatment
/// setup every realistic study uses.
pub fn load_realistic(path: &Path) -> Result<MediaMap> {
    let media = crate::io::hfgm::read_media(path)?;
    if media.immersion() != Tissue::Water {
        return Err(Error::Format(format!(
            "realistic phantom must be water-immersed, file declares {}",
            media.immersion().name()
        )));
    }
    if media.count_tissue() == 0 {
        return Err(Error::Format(
            "realistic phantom holds no tissue cells".into(),
        ));
    }
    Ok(media)
}

/// Default radius of the treatment region around the target, metres.
pub const DEFAULT_TREATMENT_RADIUS: f64 = 0.01;

fn default_treatment_radius() -> f64 {
    DEFAULT_TREATMENT_RADIUS
}

/// Disk region whose Debye parameters shrink step by step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreatmentRegion {
    /// Centre, metres from the grid centre.
    pub center: [f64; 2],
    /// Radius, metres.
    #[serde(default = "default_treatment_radius")]
    pub radius: f64,
    /// Fraction multiplier per step, newest last.
    pub fractions: Vec<f64>,
}

/// Degradation of all tissue outside the treatment disk and the hotspots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurroundingRegion {
    pub fractions: Vec<f64>,
}

/// Named auxiliary disk degrading at its own rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HotspotRegion {
    pub name: String,
    pub center: [f64; 2],
    pub radius: f64,
    pub fractions: Vec<f64>,
}

/// Per-region fraction multipliers over the steps of a heating run. Step 0
/// conventionally carries all-ones (the undegraded state).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSchedule {
    pub treatment: TreatmentRegion,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surrounding: Option<SurroundingRegion>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hotspots: Vec<HotspotRegion>,
}

fn check_fractions(name: &str, fr: &[f64], steps: usize) -> Result<()> {
    if fr.len() != steps {
        return Err(Error::Config(format!(
            "region '{name}' lists {} fractions, the treatment region {steps}; \
             every region must cover the same steps",
            fr.len()
        )));
    }
    for (k, &f) in fr.iter().enumerate() {
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::Config(format!(
                "region '{name}' step {k}: fraction {f} outside (0, 1]"
            )));
        }
        if k > 0 && f > fr[k - 1] {
            return Err(Error::Config(format!(
                "region '{name}' step {k}: fraction {f} exceeds the previous step's {}; \
                 heating only degrades the parameters",
                fr[k - 1]
            )));
        }
    }
    Ok(())
}

impl ScenarioSchedule {
    pub fn n_steps(&self) -> usize {
        self.treatment.fractions.len()
    }

    pub fn validate(&self) -> Result<()> {
        let steps = self.n_steps();
        if steps == 0 {
            return Err(Error::Config("schedule lists no steps".into()));
        }
        if !(self.treatment.radius > 0.0) {
            return Err(Error::Config(format!(
                "treatment radius must be positive, got {}",
                self.treatment.radius
            )));
        }
        check_fractions("treatment", &self.treatment.fractions, steps)?;
        if let Some(s) = &self.surrounding {
            check_fractions("surrounding", &s.fractions, steps)?;
        }
        for (k, h) in self.hotspots.iter().enumerate() {
            if h.name.is_empty() {
                return Err(Error::Config(format!("hotspot {k} has an empty name")));
            }
            if self.hotspots[..k].iter().any(|o| o.name == h.name) {
                return Err(Error::Config(format!(
                    "hotspot name '{}' appears twice",
                    h.name
                )));
            }
            if !(h.radius > 0.0) {
                return Err(Error::Config(format!(
                    "hotspot '{}' radius must be positive, got {}",
                    h.name, h.radius
                )));
            }
            check_fractions(&h.name, &h.fractions, steps)?;
        }
        self.check_disjoint()?;
        Ok(())
    }

    /// Hotspots must not overlap each other or the treatment disk; the
    /// regions are defined as disjoint and overlapping ones would make the
    /// applied fraction order-dependent.
    fn check_disjoint(&self) -> Result<()> {
        let mut disks: Vec<(&str, [f64; 2], f64)> =
            vec![("treatment", self.treatment.center, self.treatment.radius)];
        for h in &self.hotspots {
            disks.push((&h.name, h.center, h.radius));
        }
        for a in 0..disks.len() {
            for b in a + 1..disks.len() {
                let dx = disks[a].1[0] - disks[b].1[0];
                let dy = disks[a].1[1] - disks[b].1[1];
                let dist = (dx * dx + dy * dy).sqrt();
                if dist < disks[a].2 + disks[b].2 {
                    return Err(Error::Geometry(format!(
                        "regions '{}' and '{}' overlap (centres {:.4} m apart, radii {} + {} m)",
                        disks[a].0, disks[b].0, dist, disks[a].2, disks[b].2
                    )));
                }
            }
        }
        Ok(())
    }

    /// Parse a schedule from its on-disk TOML form.
    pub fn load(path: &Path) -> Result<ScenarioSchedule> {
        let text = std::fs::read_to_string(path)?;
        let schedule: ScenarioSchedule = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        schedule.validate()?;
        Ok(schedule)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.validate()?;
        let text = toml::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("schedule serialization: {e}")))?;
        std::fs::write(path, text)?;
        Ok(())
    }
}

/// Which regions a canonical degradation schedule exercises.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScheduleKind {
    /// Only the treatment disk degrades (5% per step).
    TreatmentOnly,
    /// Treatment disk 5% per step, all surrounding tissue 2% per step.
    TreatmentAndSurround,
    /// As above plus three hotspot disks at 1%, 3% and 4% per step.
    TreatmentSurroundHotspots,
}

/// Evenly decremented fractions: step `k` carries `(100 - pct k) / 100`,
/// computed in integer percent so the values parse back identically from
/// their two-decimal text form.
pub fn stepped_fractions(percent_per_step: u32, steps: usize) -> Result<Vec<f64>> {
    if steps == 0 {
        return Err(Error::Config("a schedule needs at least one step".into()));
    }
    let last = percent_per_step as u64 * (steps as u64 - 1);
    if last >= 100 {
        return Err(Error::Config(format!(
            "{percent_per_step}% per step over {steps} steps drives the fraction to \
             {}%, below the physical floor",
            100 - last as i64
        )));
    }
    Ok((0..steps)
        .map(|k| (100 - percent_per_step as u64 * k as u64) as f64 / 100.0)
        .collect())
}

/// Canonical degradation schedule over the standard off-centre target at
/// (-3 cm, 0) with the standard 1 cm treatment disk degrading. Fourteen
/// steps runs the treatment region down to 0.35 and the surrounding to 0.74
/// of baseline; eight steps is the milder reading (0.65 / 0.86).
pub fn canonical_schedule(kind: ScheduleKind, steps: usize) -> Result<ScenarioSchedule> {
    let treatment = TreatmentRegion {
        center: [-0.03, 0.0],
        radius: DEFAULT_TREATMENT_RADIUS,
        fractions: stepped_fractions(5, steps)?,
    };
    let surrounding = match kind {
        ScheduleKind::TreatmentOnly => None,
        _ => Some(SurroundingRegion {
            fractions: stepped_fractions(2, steps)?,
        }),
    };
    let hotspots = match kind {
        ScheduleKind::TreatmentSurroundHotspots => vec![
            HotspotRegion {
                name: "A".into(),
                center: [0.02, 0.02],
                radius: 0.01,
                fractions: stepped_fractions(1, steps)?,
            },
            HotspotRegion {
                name: "B".into(),
                center: [0.015, -0.025],
                radius: 0.01,
                fractions: stepped_fractions(3, steps)?,
            },
            HotspotRegion {
                name: "C".into(),
                center: [-0.005, 0.035],
                radius: 0.01,
                fractions: stepped_fractions(4, steps)?,
            },
        ],
        _ => Vec::new(),
    };
    let schedule = ScenarioSchedule {
        treatment,
        surrounding,
        hotspots,
    };
    schedule.validate()?;
    Ok(schedule)
}

/// Stamp one step of a degradation schedule onto `base`. The fraction a
/// tissue cell receives is, in order of precedence: the treatment disk's,
/// a hotspot's, else the surrounding fraction (1 if the schedule has no
/// surrounding region). Bath cells never change.
pub fn apply_scenario(
    base: &MediaMap,
    schedule: &ScenarioSchedule,
    step: usize,
) -> Result<MediaMap> {
    schedule.validate()?;
    if step >= schedule.n_steps() {
        return Err(Error::Config(format!(
            "schedule step {step} out of range; the schedule has {} steps",
            schedule.n_steps()
        )));
    }
    let grid = *base.grid();
    let mut out = base.clone();
    let in_disk = |c: Cell, center: [f64; 2], radius: f64| {
        let (x, y) = grid.cell_center(c);
        let (dx, dy) = (x - center[0], y - center[1]);
        dx * dx + dy * dy <= radius * radius
    };
    for c in base.cells() {
        if !base.is_tissue(c) {
            continue;
        }
        let mut fraction = schedule
            .surrounding
            .as_ref()
            .map_or(1.0, |s| s.fractions[step]);
        for h in &schedule.hotspots {
            if in_disk(c, h.center, h.radius) {
                fraction = h.fractions[step];
            }
        }
        if in_disk(c, schedule.treatment.center, schedule.treatment.radius) {
            fraction = schedule.treatment.fractions[step];
        }
        if fraction != 1.0 {
            out.set_debye(c, base.debye_at(c).scaled(fraction)?)?;
        }
    }
    Ok(out)
}

/// Deterministic synthetic phantom with scattered fibroglandular structure:
/// a slightly irregular fatty outline of roughly 5 to 5.5 cm radius, a 2 mm
/// dermal rim, and random fibroglandular blobs until they make up 20 to 35%
/// of the tissue cells. Water immersion.
pub fn generate_scattered_fibroglandular(seed: u64, grid: GridSpec) -> Result<MediaMap> {
    grid.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r0 = rng.gen_range(0.050..0.055);
    let a2 = rng.gen_range(0.0..0.05);
    let p2 = rng.gen_range(0.0..std::f64::consts::TAU);
    let a3 = rng.gen_range(0.0..0.04);
    let p3 = rng.gen_range(0.0..std::f64::consts::TAU);
    let outline = |theta: f64| r0 * (1.0 + a2 * (2.0 * theta + p2).cos() + a3 * (3.0 * theta + p3).cos());
    let outline_max = r0 * (1.0 + a2 + a3);

    let margin = (grid.pml_thickness as f64 + 2.0) * grid.dx;
    let half = (0.5 * grid.width()).min(0.5 * grid.height());
    if outline_max + margin > half {
        return Err(Error::Geometry(format!(
            "generated outline (up to {outline_max:.4} m) plus the {margin:.4} m boundary \
             margin does not fit the {half:.4} m half-width; enlarge the grid"
        )));
    }

    const SKIN_DEPTH: f64 = 0.002;
    let mut media = MediaMap::immersed(grid, Tissue::Water)?;
    for c in (0..grid.n_cells()).map(|k| Cell::new(k % grid.nx, k / grid.nx)) {
        let (x, y) = grid.cell_center(c);
        let r = (x * x + y * y).sqrt();
        let edge = outline(y.atan2(x));
        if r <= edge {
            let label = if r > edge - SKIN_DEPTH {
                Tissue::Skin
            } else {
                Tissue::Fat
            };
            media.set_cell(c, label, label.debye())?;
        }
    }

    let target_fraction = rng.gen_range(0.22..0.33);
    let mut attempts = 0usize;
    while media.tissue_fraction(Tissue::Fibroglandular) < target_fraction {
        attempts += 1;
        if attempts > 500 {
            return Err(Error::Config(format!(
                "fibroglandular placement stalled at fraction {:.3} after {attempts} draws; \
                 the grid is too coarse for the requested structure",
                media.tissue_fraction(Tissue::Fibroglandular)
            )));
        }
        let br = rng.gen_range(0.004..0.007);
        let bx = rng.gen_range(-outline_max..outline_max);
        let by = rng.gen_range(-outline_max..outline_max);
        let rc = (bx * bx + by * by).sqrt();
        // The blob must sit fully inside the fatty interior, clear of the rim.
        if rc + br + SKIN_DEPTH + grid.dx > outline(by.atan2(bx)) {
            continue;
        }
        for c in (0..grid.n_cells()).map(|k| Cell::new(k % grid.nx, k / grid.nx)) {
            if media.tissue_at(c) != Tissue::Fat {
                continue;
            }
            let (x, y) = grid.cell_center(c);
            let (dx, dy) = (x - bx, y - by);
            if dx * dx + dy * dy <= br * br {
                media.set_cell(c, Tissue::Fibroglandular, Tissue::Fibroglandular.debye())?;
            }
        }
    }
    let fraction = media.tissue_fraction(Tissue::Fibroglandular);
    if !(0.20..=0.35).contains(&fraction) {
        return Err(Error::Config(format!(
            "generated fibroglandular fraction {fraction:.3} missed the 0.20..0.35 band"
        )));
    }
    Ok(media)
}
