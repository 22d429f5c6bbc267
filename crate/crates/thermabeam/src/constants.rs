//! Physical constants shared by the solvers.

/// Vacuum speed of light, m/s.
pub const C0: f64 = 299_792_458.0;

/// Vacuum permeability, H/m (4 pi x 1e-7).
pub const MU0: f64 = 1.256_637_061_435_917_3e-6;

/// Vacuum permittivity, F/m (1 / (MU0 c^2)).
pub const EPS0: f64 = 8.854_187_817_620_39e-12;

/// Arterial blood temperature used by the bio-heat perfusion term, degC.
pub const BLOOD_TEMP_C: f64 = 37.0;

/// Carrier frequency of the treatment system, Hz.
pub const CARRIER_HZ: f64 = 2.5e9;

/// -3 dB bandwidth of the acquisition pulse, Hz (30% fractional).
pub const PULSE_BANDWIDTH_HZ: f64 = 7.5e8;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eps0_is_consistent_with_c0_and_mu0() {
        let derived = 1.0 / (MU0 * C0 * C0);
        assert!(
            (derived - EPS0).abs() / EPS0 < 1e-15,
            "EPS0 must equal 1/(MU0 c^2): {derived} vs {EPS0}"
        );
    }
}
