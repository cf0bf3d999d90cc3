//! Post-processing parameter estimation: linear regression for the encoding
//! scale k, excess-noise extraction from the measured payload variance, and
//! the zero-intercept phase-noise fit across modulation variances.
//!
//! The recovery process itself injects phase noise from the reference
//! measurement and the delta pattern match. Both contributions are functions
//! of measured amplitudes only, so the pipeline estimates them from the data
//! and deconvolves the corresponding regression attenuation before forming
//! `V_A`; excess noise then reflects the channel, not the receiver.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::{Error, Result};

/// Aggregate estimation output for one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimationResult {
    pub k_hat: f64,
    pub v_a_hat: f64,
    pub xi_hat: f64,
    pub v_b: f64,
    pub residual_variance: f64,
    pub delta_phi_hat: f64,
    pub sample_count: usize,
    /// Set when `xi_hat` is negative beyond statistical tolerance.
    pub nonphysical_xi: bool,
}

/// Least-squares slope of `measured` on `digital` divided by
/// `sqrt(eta T / 2)`; the offset term is zero-mean noise and is removed by
/// centering.
pub fn fit_k(digital: &[f64], measured: &[f64], t: f64, eta: f64) -> Result<f64> {
    if digital.len() != measured.len() || digital.is_empty() {
        return Err(Error::Estimation("regression needs equal-length samples"));
    }
    if !(t > 0.0 && t <= 1.0 && eta > 0.0 && eta <= 1.0) {
        return Err(Error::Estimation("transmission and efficiency must be in (0, 1]"));
    }
    let n = digital.len() as f64;
    let md = digital.iter().sum::<f64>() / n;
    let mm = measured.iter().sum::<f64>() / n;
    let mut sdd = 0.0;
    let mut sdm = 0.0;
    for (d, m) in digital.iter().zip(measured.iter()) {
        sdd += (d - md) * (d - md);
        sdm += (d - md) * (m - mm);
    }
    if sdd == 0.0 {
        return Err(Error::Estimation("digital encoding has zero variance"));
    }
    Ok(sdm / sdd / (eta * t / 2.0).sqrt())
}

/// Slope and its standard error for a plain regression (diagnostics).
pub fn regression_slope(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(Error::Estimation("regression needs at least 3 points"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys.iter()) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 {
        return Err(Error::Estimation("regressor has zero variance"));
    }
    let slope = sxy / sxx;
    let mut ss_res = 0.0;
    for (x, y) in xs.iter().zip(ys.iter()) {
        let r = y - my - slope * (x - mx);
        ss_res += r * r;
    }
    let se = (ss_res / (n - 2.0) / sxx).sqrt();
    Ok((slope, se))
}

/// Coefficient of determination of a straight-line fit through the points.
pub fn r_squared(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let (slope, _) = regression_slope(xs, ys)?;
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for (x, y) in xs.iter().zip(ys.iter()) {
        let fitted = my + slope * (x - mx);
        ss_res += (y - fitted) * (y - fitted);
        ss_tot += (y - my) * (y - my);
    }
    if ss_tot == 0.0 {
        return Err(Error::Estimation("all observations identical"));
    }
    Ok(1.0 - ss_res / ss_tot)
}

/// Excess noise referred to the channel input, from the measured payload
/// variance: `xi = 2 (V_B - 1 - nu_e) / (T eta) - V_A`. Negative results are
/// retained, not clamped; the caller decides whether they are statistically
/// tolerable.
pub fn excess_noise(v_b: f64, v_a: f64, t: f64, eta: f64, nu_e: f64) -> Result<f64> {
    if !(t > 0.0 && t <= 1.0 && eta > 0.0 && eta <= 1.0 && nu_e >= 0.0) {
        return Err(Error::Estimation("channel constants out of range"));
    }
    Ok(2.0 * (v_b - 1.0 - nu_e) / (t * eta) - v_a)
}

/// Zero-intercept weighted least-squares slope of excess noise against
/// modulation variance, with its standard error. Points are `(v_a, xi)`.
pub fn fit_phase_noise(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    if points.len() < 3 {
        return Err(Error::Estimation("phase-noise fit needs at least 3 points"));
    }
    let mut svx = 0.0;
    let mut svv = 0.0;
    for &(v, xi) in points {
        svx += v * xi;
        svv += v * v;
    }
    if svv == 0.0 {
        return Err(Error::Estimation("zero modulation variance"));
    }
    let slope = svx / svv;
    let mut ss = 0.0;
    for &(v, xi) in points {
        let r = xi - slope * v;
        ss += r * r;
    }
    let se = (ss / (points.len() as f64 - 1.0) / svv).sqrt();
    Ok((slope, se))
}

/// Receiver-side recovery-noise budget, estimated from measured amplitudes.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RecoveryNoise {
    /// Per-symbol phase variance from the reference measurement.
    pub v_ref: f64,
    /// Packet-wide phase variance of the delta estimate.
    pub v_delta: f64,
}

impl RecoveryNoise {
    /// Reference term from the mean squared reference amplitude (noise
    /// subtracted) and the per-quadrature noise variance of the key path:
    /// the effective variance -2 ln E[cos eps] of the arctangent phase error
    /// is `r (1 + r)` with `r = noise / amplitude^2` (exact to 1e-5 for
    /// r < 0.03). Delta term from the perpendicular residual power of the
    /// aligned pattern symbols over their summed squared amplitudes.
    pub fn from_measured(ref_amp2: f64, perp_residual_var: f64, pattern_amp2_sum: f64, noise_var: f64) -> Self {
        let v_ref = if ref_amp2 > 0.0 {
            let r = noise_var / ref_amp2;
            r * (1.0 + r)
        } else {
            0.0
        };
        let v_delta = if pattern_amp2_sum > 0.0 {
            perp_residual_var / pattern_amp2_sum
        } else {
            0.0
        };
        RecoveryNoise { v_ref, v_delta }
    }

    pub fn total(&self) -> f64 {
        self.v_ref + self.v_delta
    }

    /// Expected regression attenuation factor `E[cos eps] = exp(-v/2)`.
    pub fn attenuation(&self) -> f64 {
        (-self.total() / 2.0).exp()
    }
}

/// Per-V_A aggregation over packets.
#[derive(Debug, Clone, PartialEq)]
pub struct VaPointEstimate {
    pub v_a_nominal: f64,
    pub xi_mean: f64,
    pub xi_stderr: f64,
    pub k_mean: f64,
    pub v_b_mean: f64,
    pub v_a_hat_mean: f64,
    pub packets: usize,
    pub xi_per_packet: Vec<f64>,
}

impl VaPointEstimate {
    pub fn from_packets(v_a_nominal: f64, xi: &[f64], k: &[f64], v_b: &[f64], v_a_hat: &[f64]) -> Self {
        let n = xi.len().max(1) as f64;
        let xi_mean = xi.iter().sum::<f64>() / n;
        let var = if xi.len() > 1 {
            xi.iter().map(|x| (x - xi_mean) * (x - xi_mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        VaPointEstimate {
            v_a_nominal,
            xi_mean,
            xi_stderr: (var / n).sqrt(),
            k_mean: k.iter().sum::<f64>() / n,
            v_b_mean: v_b.iter().sum::<f64>() / n,
            v_a_hat_mean: v_a_hat.iter().sum::<f64>() / n,
            packets: xi.len(),
            xi_per_packet: xi.to_vec(),
        }
    }
}
