//! Drive waveforms: a Gaussian-modulated sinusoid for channel sounding and a
//! ramped continuous wave for steady-state heating runs.

use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Gaussian-modulated sinusoidal pulse.
///
/// The envelope width follows from the requested full width at half maximum
/// of the *power spectrum*: `sigma_t = sqrt(ln 2) / (pi * bandwidth)`. The
/// pulse is delayed by `delay_sigmas` envelope widths so it starts smoothly
/// from (numerical) zero.
#[derive(Clone, Copy, Debug)]
pub struct PulseSpec {
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub delay_sigmas: f64,
    pub amplitude: f64,
}

impl PulseSpec {
    pub fn new(carrier_hz: f64, bandwidth_hz: f64) -> Result<PulseSpec> {
        let spec = PulseSpec {
            carrier_hz,
            bandwidth_hz,
            delay_sigmas: 5.0,
            amplitude: 1.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.carrier_hz > 0.0) {
            return Err(Error::Config(format!(
                "carrier frequency must be positive, got {}",
                self.carrier_hz
            )));
        }
        if !(self.bandwidth_hz > 0.0 && self.bandwidth_hz < 2.0 * self.carrier_hz) {
            return Err(Error::Config(format!(
                "pulse bandwidth must lie in (0, 2 * carrier); got {} at carrier {}",
                self.bandwidth_hz, self.carrier_hz
            )));
        }
        if !(self.delay_sigmas >= 4.0) {
            return Err(Error::Config(format!(
                "pulse delay of {} envelope widths would truncate the leading tail; need >= 4",
                self.delay_sigmas
            )));
        }
        Ok(())
    }

    /// Envelope standard deviation in seconds.
    pub fn sigma_t(&self) -> f64 {
        (2.0_f64.ln()).sqrt() / (PI * self.bandwidth_hz)
    }

    /// Centre-of-envelope delay in seconds.
    pub fn t0(&self) -> f64 {
        self.delay_sigmas * self.sigma_t()
    }

    /// Time after which the drive has decayed back to numerical silence.
    pub fn support_end(&self) -> f64 {
        self.t0() + self.delay_sigmas * self.sigma_t()
    }

    /// Waveform value at time `t`.
    pub fn eval(&self, t: f64) -> f64 {
        let u = t - self.t0();
        let s = self.sigma_t();
        self.amplitude * (-u * u / (2.0 * s * s)).exp() * (2.0 * PI * self.carrier_hz * u).sin()
    }
}

/// Raised-cosine turn-on ramp: 0 at `t = 0`, 1 from `t_ramp` onward, with a
/// continuous derivative at both ends.
#[inline]
pub fn raised_cosine_ramp(t: f64, t_ramp: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= t_ramp {
        1.0
    } else {
        0.5 * (1.0 - (PI * t / t_ramp).cos())
    }
}

/// Single-bin discrete Fourier transform of a uniformly sampled real series,
/// scaled by the sample interval so it approximates the continuous transform:
/// `X(f) = sum s[n] * exp(-j 2 pi f n dt) * dt`.
pub fn single_bin_dft(series: &[f64], dt: f64, f_hz: f64) -> num_complex::Complex64 {
    use num_complex::Complex64;
    let w = -2.0 * PI * f_hz * dt;
    // incremental rotation keeps this O(n) without repeated sin/cos calls
    let rot = Complex64::new(w.cos(), w.sin());
    let mut phase = Complex64::new(1.0, 0.0);
    let mut acc = Complex64::new(0.0, 0.0);
    for &s in series {
        acc += s * phase;
        phase *= rot;
    }
    acc * dt
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pulse_width_matches_bandwidth() {
        let p = PulseSpec::new(2.5e9, 7.5e8).unwrap();
        assert!((p.sigma_t() - 3.533_471_513_591_958_3e-10).abs() < 1e-22);
        assert!((p.t0() - 5.0 * p.sigma_t()).abs() < 1e-24);
    }

    #[test]
    fn pulse_starts_and_ends_silent() {
        let p = PulseSpec::new(2.5e9, 7.5e8).unwrap();
        assert!(p.eval(0.0).abs() < 4e-6, "leading tail below ~exp(-12.5)");
        assert!(p.eval(p.support_end()).abs() < 4e-6);
        // and the peak is order one somewhere in the middle
        let peak = (0..4000)
            .map(|n| p.eval(n as f64 * 1e-12).abs())
            .fold(0.0, f64::max)
            ;
        assert!(peak > 0.9 && peak <= 1.0);
    }

    #[test]
    fn pulse_spectrum_peaks_at_carrier() {
        // densely sample the analytic waveform and confirm the spectral
        // magnitude at the carrier is within 1% of the global peak
        let p = PulseSpec::new(2.5e9, 7.5e8).unwrap();
        let dt = 1e-12;
        let n = (2.0 * p.t0() / dt) as usize;
        let series: Vec<f64> = (0..n).map(|k| p.eval(k as f64 * dt)).collect();
        let at_carrier = single_bin_dft(&series, dt, p.carrier_hz).norm();
        let peak = (1..60)
            .map(|k| single_bin_dft(&series, dt, k as f64 * 1e8).norm())
            .fold(0.0, f64::max);
        assert!(
            at_carrier >= 0.99 * peak,
            "carrier bin {at_carrier:.3e} vs spectral peak {peak:.3e}"
        );
    }

    #[test]
    fn overwide_bandwidth_is_rejected() {
        let err = PulseSpec::new(2.5e9, 5.1e9).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn ramp_is_monotone_and_clamped() {
        assert_eq!(raised_cosine_ramp(-1.0, 1.0), 0.0);
        assert_eq!(raised_cosine_ramp(2.0, 1.0), 1.0);
        let mut prev = 0.0;
        for k in 0..=100 {
            let v = raised_cosine_ramp(k as f64 / 100.0, 1.0);
            assert!(v >= prev);
            prev = v;
        }
        assert!((raised_cosine_ramp(0.5, 1.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn dft_recovers_a_pure_tone() {
        let f = 2.5e9;
        let dt = 1.0 / f / 485.0;
        let n = 485 * 4;
        let series: Vec<f64> = (0..n)
            .map(|k| (2.0 * PI * f * k as f64 * dt).cos())
            .collect();
        let x = single_bin_dft(&series, dt, f);
        // cos transforms to (T/2, 0) over a whole number of periods
        let expect = n as f64 * dt / 2.0;
        assert!((x.re - expect).abs() / expect < 1e-10);
        assert!(x.im.abs() / expect < 1e-10);
    }
}
