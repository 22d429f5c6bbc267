//! Coupled electromagnetic / thermal simulation toolkit for non-invasive
//! microwave hyperthermia planning.
//!
//! A phased ring of antennas deposits microwave power inside lossy dispersive
//! tissue; the deposited power drives a bio-heat solver. The toolkit covers
//! the full planning loop:
//!
//! * 2D TMz FDTD solver with single-pole Debye media (auxiliary differential
//!   equation) terminated by a uniaxial PML ([`em`])
//! * time-reversal channel acquisition and conjugate / linearly-constrained
//!   (LCMP) beamformer design with focus and null objectives ([`beamformer`])
//! * Pennes bio-heat solver with convective immersion boundaries ([`thermal`])
//! * phantom builders: homogeneous disks, two-inclusion model, seeded
//!   scattered-fibroglandular generator, degradation schedules ([`phantom`])
//! * power / temperature metrics and comparison reports ([`metrics`])
//! * config-driven batch scenario runner with deterministic output bundles
//!   ([`scenario`]), exposed by the `thermabeam` binary
//!
//! The quickest way in is the `examples/` directory; each example is a
//! self-contained study runnable with
//! `cargo run --release -p thermabeam --example <name>`:
//!
//! | example | what it shows |
//! |---|---|
//! | `debye_dispersion` | tissue dielectric spectra and effective conductivity |
//! | `time_reversal_focus` | acquire channels, conjugate weights, power map |
//! | `element_count_sweep` | focal quality vs array element count |
//! | `immersion_comparison` | air vs water immersion, EM + thermal contrast |
//! | `degradation_scenarios` | static vs adaptive refocusing under tissue change |
//! | `null_steering` | LCMP nulls protecting a secondary inclusion |
//! | `realistic_phantom` | generated scattered-fibroglandular breast run |

pub mod beamformer;
pub mod constants;
pub mod em;
pub mod error;
pub mod grid;
pub mod io;
pub mod media;
pub mod metrics;
pub mod phantom;
pub mod scenario;
pub mod thermal;
pub mod tissue;

pub use error::{Error, Result};
pub use grid::{Cell, GridSpec};
pub use media::MediaMap;
pub use tissue::{DebyeParams, ThermalParams, Tissue};
