//! Quadrature samples, shot-noise-unit conversion, and the Z / photon-number
//! arithmetic shared by triggering, calibration, and estimation.
//!
//! All protocol math runs in shot-noise units (SNU): vacuum noise contributes
//! unit variance per quadrature. Raw ADC counts exist only at the receiver
//! boundary and are mapped to SNU by dividing by the square root of the
//! measured shot variance.

#[allow(unused_imports)]
use num_traits::Float;

use crate::{Error, Result};

/// Unit system of a quadrature sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Units {
    AdcCounts,
    ShotNoiseUnits,
}

/// One heterodyne measurement outcome: both quadratures of one time-bin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadSample {
    pub x: f64,
    pub p: f64,
    pub units: Units,
}

impl QuadSample {
    pub fn adc(x: f64, p: f64) -> Self {
        QuadSample { x, p, units: Units::AdcCounts }
    }

    pub fn snu(x: f64, p: f64) -> Self {
        QuadSample { x, p, units: Units::ShotNoiseUnits }
    }
}

/// A Z measurement together with the calibration values needed to interpret
/// it. `z_shot` and `z_elec` are the vacuum and electrical contributions for
/// the same unit system and noise path as `z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZValue {
    pub z: f64,
    pub z_shot: f64,
    pub z_elec: f64,
}

impl ZValue {
    /// Arriving photon number implied by this Z value.
    pub fn photon_number(&self, eta: f64) -> Result<f64> {
        photon_number(self.z, self.z_shot, self.z_elec, eta)
    }
}

/// Trusted receiver constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConstants {
    /// Photodiode efficiency, in (0, 1].
    pub eta_det: f64,
    /// Transmission through the receiver optics, in (0, 1].
    pub t_bob: f64,
    /// Electrical noise variance in SNU at nominal LO power.
    pub nu_e: f64,
}

impl DetectorConstants {
    /// Effective detection efficiency eta = eta_det * t_bob.
    pub fn eta(&self) -> f64 {
        self.eta_det * self.t_bob
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.eta_det > 0.0
            && self.eta_det <= 1.0
            && self.t_bob > 0.0
            && self.t_bob <= 1.0
            && self.nu_e >= 0.0
            && self.nu_e.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Calibration("detector constants out of range"))
        }
    }
}

impl Default for DetectorConstants {
    fn default() -> Self {
        // eta = 0.42 effective
        DetectorConstants { eta_det: 0.5, t_bob: 0.84, nu_e: 0.175 }
    }
}

/// Convert an ADC-count sample to shot-noise units given the per-quadrature
/// shot variance measured in ADC counts squared.
pub fn to_snu(sample: QuadSample, shot_variance: f64, elec_variance: f64) -> Result<QuadSample> {
    if !(shot_variance > 0.0) || !shot_variance.is_finite() {
        return Err(Error::Calibration("shot variance must be positive"));
    }
    if !(elec_variance >= 0.0) || !elec_variance.is_finite() {
        return Err(Error::Calibration("electrical variance must be non-negative"));
    }
    if sample.units != Units::AdcCounts {
        return Err(Error::Calibration("sample already in shot-noise units"));
    }
    let s = shot_variance.sqrt();
    Ok(QuadSample::snu(sample.x / s, sample.p / s))
}

/// Inverse of [`to_snu`], back to ADC counts.
pub fn from_snu(sample: QuadSample, shot_variance: f64) -> Result<QuadSample> {
    if !(shot_variance > 0.0) || !shot_variance.is_finite() {
        return Err(Error::Calibration("shot variance must be positive"));
    }
    if sample.units != Units::ShotNoiseUnits {
        return Err(Error::Calibration("sample not in shot-noise units"));
    }
    let s = shot_variance.sqrt();
    Ok(QuadSample::adc(sample.x * s, sample.p * s))
}

/// Z = X^2 + P^2.
pub fn z_value(sample: &QuadSample) -> f64 {
    sample.x * sample.x + sample.p * sample.p
}

/// Arriving photon number from a mean Z value: the detected photon number is
/// `(z - z_shot - z_elec) / z_shot` and the arriving number is twice that
/// divided by the detection efficiency.
pub fn photon_number(z_mean: f64, z_shot: f64, z_elec: f64, eta: f64) -> Result<f64> {
    if !(z_shot > 0.0) {
        return Err(Error::Calibration("z_shot must be positive"));
    }
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::Calibration("eta must be in (0, 1]"));
    }
    let n_det = (z_mean - z_shot - z_elec) / z_shot;
    Ok(2.0 * n_det / eta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{gaussian_pair, EntropySource};

    #[test]
    fn z_value_basics() {
        assert_eq!(z_value(&QuadSample::snu(3.0, 4.0)), 25.0);
        assert_eq!(z_value(&QuadSample::snu(0.0, 0.0)), 0.0);
    }

    #[test]
    fn z_is_rotation_invariant() {
        let s = QuadSample::snu(1.7, -0.4);
        let z0 = z_value(&s);
        for k in 0..16 {
            let a = k as f64 * 0.41;
            let r = QuadSample::snu(
                s.x * a.cos() - s.p * a.sin(),
                s.x * a.sin() + s.p * a.cos(),
            );
            assert!((z_value(&r) - z0).abs() < 1e-12);
        }
    }

    #[test]
    fn mean_z_of_shot_noise_is_two() {
        let mut src = EntropySource::seeded(11);
        let n = 100_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let g = gaussian_pair(&mut src, 1.0).unwrap();
            acc += z_value(&QuadSample::snu(g.x, g.p));
        }
        let mean = acc / n as f64;
        assert!((mean - 2.0).abs() < 0.06, "mean z = {mean}");
    }

    #[test]
    fn snu_conversion_normalizes_shot_noise() {
        let mut src = EntropySource::seeded(12);
        let shot = 4096.0; // counts^2 per quadrature
        let n = 100_000;
        let mut sum2 = 0.0;
        for _ in 0..n {
            let g = gaussian_pair(&mut src, shot.sqrt()).unwrap();
            let s = to_snu(QuadSample::adc(g.x, g.p), shot, 0.0).unwrap();
            sum2 += s.x * s.x + s.p * s.p;
        }
        let var = sum2 / (2.0 * n as f64);
        assert!((var - 1.0).abs() < 0.02, "converted variance {var}");
    }

    #[test]
    fn snu_conversion_tracks_injected_variance() {
        // ADC stream with four times the shot variance converts to 4.0 SNU.
        let mut src = EntropySource::seeded(13);
        let shot = 100.0;
        let n = 100_000;
        let mut sum2 = 0.0;
        for _ in 0..n {
            let g = gaussian_pair(&mut src, (4.0 * shot).sqrt()).unwrap();
            let s = to_snu(QuadSample::adc(g.x, g.p), shot, 0.0).unwrap();
            sum2 += s.x * s.x + s.p * s.p;
        }
        let var = sum2 / (2.0 * n as f64);
        assert!((var - 4.0).abs() < 0.08, "converted variance {var}");
    }

    #[test]
    fn zero_shot_variance_is_rejected() {
        assert!(to_snu(QuadSample::adc(1.0, 1.0), 0.0, 0.0).is_err());
        assert!(to_snu(QuadSample::adc(1.0, 1.0), -3.0, 0.0).is_err());
    }

    #[test]
    fn photon_number_formula() {
        // vacuum input
        assert!(photon_number(2.35, 2.0, 0.35, 0.42).unwrap().abs() < 1e-12);
        // direct evaluation
        let n = photon_number(502.0, 2.0, 0.0, 0.5).unwrap();
        assert!((n - 1000.0).abs() < 1e-9);
        // degenerate calibration
        assert!(photon_number(5.0, 0.0, 0.0, 0.5).is_err());
        assert!(photon_number(5.0, 2.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn detector_constants() {
        let d = DetectorConstants::default();
        assert!((d.eta() - 0.42).abs() < 1e-12);
        assert!(d.validate().is_ok());
        let bad = DetectorConstants { eta_det: 0.0, ..d };
        assert!(bad.validate().is_err());
    }
}
