//! Tissue catalogue: single-pole Debye dielectrics and bio-heat parameters.
//!
//! Dielectrics follow the e^{+j omega t} convention, so passive media have
//! `Im(eps) <= 0`:
//!
//! ```text
//! eps(omega) = eps_inf + delta_eps / (1 + j omega tau) + sigma_s / (j omega eps0)
//! ```
//!
//! The loss actually dissipated at a given frequency is summarised by the
//! effective conductivity `sigma_eff = eps'' * omega * eps0`, which the
//! power-deposition map uses at the carrier.

use crate::constants::{C0, EPS0};
use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Single-pole Debye dispersion parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DebyeParams {
    /// Relative permittivity at infinite frequency.
    pub eps_inf: f64,
    /// Pole amplitude (eps_static - eps_inf).
    pub delta_eps: f64,
    /// Static conductivity, S/m.
    pub sigma_s: f64,
    /// Relaxation time, seconds.
    pub tau: f64,
}

impl DebyeParams {
    pub fn new(eps_inf: f64, delta_eps: f64, sigma_s: f64, tau: f64) -> Self {
        DebyeParams {
            eps_inf,
            delta_eps,
            sigma_s,
            tau,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps_inf >= 1.0) {
            return Err(Error::Config(format!("eps_inf must be >= 1, got {}", self.eps_inf)));
        }
        if !(self.delta_eps >= 0.0) {
            return Err(Error::Config(format!(
                "delta_eps must be >= 0, got {}",
                self.delta_eps
            )));
        }
        if !(self.sigma_s >= 0.0) {
            return Err(Error::Config(format!(
                "sigma_s must be >= 0, got {}",
                self.sigma_s
            )));
        }
        if !(self.tau > 0.0) {
            return Err(Error::Config(format!("tau must be > 0, got {}", self.tau)));
        }
        Ok(())
    }

    /// Complex relative permittivity at frequency `f` (Hz, must be > 0).
    pub fn permittivity(&self, f: f64) -> Complex64 {
        assert!(f > 0.0, "permittivity needs a positive frequency");
        let w = 2.0 * PI * f;
        let pole = Complex64::new(self.delta_eps, 0.0) / Complex64::new(1.0, w * self.tau);
        Complex64::new(self.eps_inf, -self.sigma_s / (w * EPS0)) + pole
    }

    /// Effective conductivity `eps'' * omega * eps0` at frequency `f`, S/m.
    pub fn effective_conductivity(&self, f: f64) -> f64 {
        let w = 2.0 * PI * f;
        // `+ 0.0` turns the negative zero of lossless media into plain zero.
        -self.permittivity(f).im * w * EPS0 + 0.0
    }

    /// Complex refractive index `n' - j n''` at frequency `f`.
    pub fn refractive_index(&self, f: f64) -> Complex64 {
        self.permittivity(f).sqrt()
    }

    /// Plane-wave field attenuation constant at frequency `f`, Np/m.
    pub fn attenuation(&self, f: f64) -> f64 {
        -2.0 * PI * f / C0 * self.refractive_index(f).im + 0.0
    }

    /// Scale `eps_inf`, `delta_eps` and `sigma_s` by `fraction`, leaving `tau`
    /// untouched; `eps_inf` is clamped to stay physical (>= 1).
    ///
    /// This is the degradation model used by the treatment scenarios: tissue
    /// state change shows up as a proportional drop of the dispersion
    /// amplitudes, not of the relaxation dynamics.
    pub fn scaled(&self, fraction: f64) -> Result<DebyeParams> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::Config(format!(
                "scale fraction must lie in (0, 1], got {fraction}"
            )));
        }
        Ok(DebyeParams {
            eps_inf: (self.eps_inf * fraction).max(1.0),
            delta_eps: self.delta_eps * fraction,
            sigma_s: self.sigma_s * fraction,
            tau: self.tau,
        })
    }
}

/// Bio-heat (Pennes) parameters of one tissue.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermalParams {
    /// Specific heat Cp, J/kg/degC.
    pub specific_heat: f64,
    /// Thermal conductivity K, W/m/degC.
    pub conductivity: f64,
    /// Density rho, kg/m^3.
    pub density: f64,
    /// Metabolic volumetric heating A0, W/m^3.
    pub metabolic: f64,
    /// Blood-perfusion coefficient B, W/m^3/degC.
    pub perfusion: f64,
}

impl ThermalParams {
    pub fn volumetric_heat_capacity(&self) -> f64 {
        self.specific_heat * self.density
    }
}

/// Tissue / medium labels carried per cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tissue {
    Fat,
    Fibroglandular,
    /// Thin dermal rim of generated phantoms. Dielectrically and thermally a
    /// stand-in carrying the fibroglandular parameters under its own label.
    Skin,
    Water,
    Air,
    /// Cell whose Debye parameters were set directly (e.g. spatially averaged
    /// media). Thermal parameters follow the fibroglandular column.
    Custom,
}

impl Tissue {
    pub const ALL: [Tissue; 6] = [
        Tissue::Fat,
        Tissue::Fibroglandular,
        Tissue::Skin,
        Tissue::Water,
        Tissue::Air,
        Tissue::Custom,
    ];

    /// Stable numeric code used by the on-disk grid format.
    pub fn code(self) -> u32 {
        match self {
            Tissue::Fat => 0,
            Tissue::Fibroglandular => 1,
            Tissue::Skin => 2,
            Tissue::Water => 3,
            Tissue::Air => 4,
            Tissue::Custom => 5,
        }
    }

    pub fn from_code(code: u32) -> Result<Tissue> {
        Tissue::ALL
            .into_iter()
            .find(|t| t.code() == code)
            .ok_or_else(|| Error::Format(format!("unknown tissue code {code}")))
    }

    pub fn name(self) -> &'static str {
        match self {
            Tissue::Fat => "fat",
            Tissue::Fibroglandular => "fibroglandular",
            Tissue::Skin => "skin",
            Tissue::Water => "water",
            Tissue::Air => "air",
            Tissue::Custom => "custom",
        }
    }

    /// Default Debye parameters of this tissue.
    ///
    /// Fat and fibroglandular carry the measured breast-tissue fits; water is
    /// the standard single-pole fit at 25 degC (its microwave loss lives
    /// entirely in the pole, sigma_s = 0, which also keeps the absorbing
    /// boundary exact in immersion media).
    pub fn debye(self) -> DebyeParams {
        match self {
            Tissue::Fat => DebyeParams::new(3.39, 2.0, 0.05, 0.15e-12),
            Tissue::Fibroglandular | Tissue::Skin | Tissue::Custom => {
                DebyeParams::new(17.5, 31.6, 0.72, 0.15e-12)
            }
            Tissue::Water => DebyeParams::new(5.2, 73.16, 0.0, 8.27e-12),
            Tissue::Air => DebyeParams::new(1.0, 0.0, 0.0, 0.15e-12),
        }
    }

    pub fn thermal(self) -> ThermalParams {
        match self {
            Tissue::Fat => ThermalParams {
                specific_heat: 2279.0,
                conductivity: 0.306,
                density: 1069.0,
                metabolic: 350.0,
                perfusion: 2229.0,
            },
            Tissue::Fibroglandular | Tissue::Skin | Tissue::Custom => ThermalParams {
                specific_heat: 3600.0,
                conductivity: 0.5,
                density: 1050.0,
                metabolic: 690.0,
                perfusion: 2700.0,
            },
            Tissue::Water => ThermalParams {
                specific_heat: 4186.0,
                conductivity: 0.6,
                density: 1000.0,
                metabolic: 0.0,
                perfusion: 0.0,
            },
            Tissue::Air => ThermalParams {
                specific_heat: 1005.0,
                conductivity: 0.026,
                density: 1.2,
                metabolic: 0.0,
                perfusion: 0.0,
            },
        }
    }

    /// Default convective film coefficient when this medium is the immersion
    /// bath, W/m^2/degC: forced water cools hard, still air barely at all.
    pub fn default_boundary_h(self) -> f64 {
        match self {
            Tissue::Water => 300.0,
            _ => 5.0,
        }
    }

    /// Default bath temperature when this medium is the immersion, degC.
    pub fn default_ambient(self) -> f64 {
        match self {
            Tissue::Water => 15.0,
            _ => 25.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const F: f64 = 2.5e9;

    // Expected values below were computed independently with 50-digit
    // arithmetic from the closed-form permittivity expression.

    #[test]
    fn fat_permittivity_at_carrier() {
        let e = Tissue::Fat.debye().permittivity(F);
        assert_relative_eq!(e.re, 5.389_988_896_756_690, max_relative = 1e-12);
        assert_relative_eq!(-e.im, 0.364_214_434_313_711_04, max_relative = 1e-12);
        assert_relative_eq!(
            Tissue::Fat.debye().effective_conductivity(F),
            0.050_655_401_344_335_94,
            max_relative = 1e-12
        );
    }

    #[test]
    fn fibroglandular_permittivity_at_carrier() {
        let e = Tissue::Fibroglandular.debye().permittivity(F);
        assert_relative_eq!(e.re, 49.099_824_568_755_70, max_relative = 1e-12);
        assert_relative_eq!(-e.im, 5.251_285_162_064_016, max_relative = 1e-12);
        assert_relative_eq!(
            Tissue::Fibroglandular.debye().effective_conductivity(F),
            0.730_355_341_240_507_8,
            max_relative = 1e-12
        );
    }

    #[test]
    fn fibroglandular_attenuation_at_carrier() {
        assert_relative_eq!(
            Tissue::Fibroglandular.debye().attenuation(F),
            19.605_435_538_602_424,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            Tissue::Fibroglandular.debye().refractive_index(F).re,
            7.017_110_028_039_42,
            max_relative = 1e-12
        );
    }

    #[test]
    fn water_fit_at_carrier() {
        let w = Tissue::Water.debye();
        assert_relative_eq!(w.permittivity(F).re, 77.145_893_501_542_76, max_relative = 1e-12);
        assert_relative_eq!(
            w.effective_conductivity(F),
            1.299_870_250_052_458_8,
            max_relative = 1e-12
        );
    }

    #[test]
    fn scaling_shrinks_amplitudes_but_not_tau() {
        let s = Tissue::Fibroglandular.debye().scaled(0.65).unwrap();
        assert_relative_eq!(s.eps_inf, 11.375, max_relative = 1e-15);
        assert_relative_eq!(s.delta_eps, 20.54, max_relative = 1e-15);
        assert_relative_eq!(s.sigma_s, 0.468, max_relative = 1e-15);
        assert_eq!(s.tau, 0.15e-12);
        assert_relative_eq!(
            s.effective_conductivity(F),
            0.474_730_971_806_330_1,
            max_relative = 1e-12
        );
    }

    #[test]
    fn scaling_clamps_eps_inf_at_unity() {
        // fat at 20%: 3.39 * 0.2 = 0.678 would be unphysical
        let s = Tissue::Fat.debye().scaled(0.2).unwrap();
        assert_eq!(s.eps_inf, 1.0);
        assert!(Tissue::Fat.debye().scaled(0.0).is_err());
        assert!(Tissue::Fat.debye().scaled(1.2).is_err());
    }

    #[test]
    fn frequency_limits_bracket_the_pole() {
        let d = DebyeParams::new(17.5, 31.6, 0.0, 0.15e-12);
        assert_relative_eq!(d.permittivity(1e3).re, 49.1, max_relative = 1e-9);
        assert_relative_eq!(d.permittivity(1e18).re, 17.5, max_relative = 1e-9);
    }

    #[test]
    fn table_values_survive_label_round_trip() {
        for t in Tissue::ALL {
            assert_eq!(Tissue::from_code(t.code()).unwrap(), t);
            t.debye().validate().unwrap();
        }
        assert!(Tissue::from_code(77).is_err());
    }

    #[test]
    fn air_is_lossless_vacuumlike() {
        let a = Tissue::Air.debye();
        assert_eq!(a.effective_conductivity(F), 0.0);
        assert_eq!(a.permittivity(F), Complex64::new(1.0, 0.0));
    }

    proptest! {
        #[test]
        fn passivity_and_conduction_floor(
            eps_inf in 1.0..80.0f64,
            delta_eps in 0.0..80.0f64,
            sigma_s in 0.0..3.0f64,
            tau_ps in 0.01..20.0f64,
            f_ghz in 0.1..10.0f64,
        ) {
            let d = DebyeParams::new(eps_inf, delta_eps, sigma_s, tau_ps * 1e-12);
            let f = f_ghz * 1e9;
            let e = d.permittivity(f);
            prop_assert!(e.im <= 0.0, "passive medium must have Im(eps) <= 0");
            // the pole only ever adds loss on top of static conduction
            prop_assert!(d.effective_conductivity(f) >= sigma_s - 1e-12);
            prop_assert!(d.attenuation(f) >= -1e-12);
        }

        #[test]
        fn scaling_composes_multiplicatively(
            frac_a in 0.5..1.0f64,
            frac_b in 0.5..1.0f64,
        ) {
            let d = Tissue::Fibroglandular.debye();
            let ab = d.scaled(frac_a).unwrap().scaled(frac_b).unwrap();
            let ba = d.scaled(frac_a * frac_b).unwrap();
            prop_assert!((ab.delta_eps - ba.delta_eps).abs() < 1e-12);
            prop_assert!((ab.sigma_s - ba.sigma_s).abs() < 1e-12);
            prop_assert_eq!(ab.tau, ba.tau);
        }
    }
}
