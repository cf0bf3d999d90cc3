//! Bob's pulsed heterodyne front-end: per-bin measurement with shot and
//! electrical noise, detector bias offsets with imperfect common-mode
//! rejection, clone-bin bias subtraction, and shot-noise calibration.
//!
//! Two noise paths leave this module. The control path differences each bin
//! against its clone 500 ns away, cancelling bias at the cost of doubled
//! noise; it feeds triggering and polarization control only. The key path
//! keeps the raw samples and removes bias in post-processing from the
//! clone-signal means of a whole packet, so key-bearing quadratures pay no
//! clone noise penalty.

#[allow(unused_imports)]
use num_traits::Float;

use crate::rng::{standard_pair, EntropySource};
use crate::tx::CoherentAmplitude;
use crate::units::{DetectorConstants, QuadSample, Units};
use crate::{Error, Result};

/// Minimum frames for a meaningful noise calibration.
pub const MIN_CALIBRATION_FRAMES: usize = 1000;

/// The four time-bins of one 1 us period.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bin {
    Signal,
    Reference,
    CloneSignal,
    CloneReference,
}

/// Local-oscillator pulse schedule: four pulses per period, the clone pair
/// offset exactly half a period from the live pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoSchedule {
    pub period_ns: f64,
    pub signal_offset_ns: f64,
    pub reference_offset_ns: f64,
    pub clone_offset_ns: f64,
    /// Current LO power in arbitrary units.
    pub lo_power: f64,
    /// Power at which the SNU calibration is defined.
    pub nominal_lo_power: f64,
    /// Timing slew bound for the lock loop, ns per period.
    pub slew_limit_ns: f64,
}

impl Default for LoSchedule {
    fn default() -> Self {
        LoSchedule {
            period_ns: 1000.0,
            signal_offset_ns: 0.0,
            reference_offset_ns: 100.0,
            clone_offset_ns: 500.0,
            lo_power: 8.0,
            nominal_lo_power: 8.0,
            slew_limit_ns: 1.0,
        }
    }
}

impl LoSchedule {
    pub fn bin_offset_ns(&self, bin: Bin) -> f64 {
        match bin {
            Bin::Signal => self.signal_offset_ns,
            Bin::Reference => self.reference_offset_ns,
            Bin::CloneSignal => self.signal_offset_ns + self.clone_offset_ns,
            Bin::CloneReference => self.reference_offset_ns + self.clone_offset_ns,
        }
    }

    pub fn relative_power(&self) -> f64 {
        self.lo_power / self.nominal_lo_power
    }
}

/// Detector bias offsets in ADC counts as slowly varying functions of time
/// and LO power (imperfect common-mode rejection of the hybrid detector).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasModel {
    pub alpha0: f64,
    pub beta0: f64,
    /// Extra offset per unit of relative LO power above nominal.
    pub alpha_per_lo: f64,
    pub beta_per_lo: f64,
    /// Linear drift in counts per second, both quadratures.
    pub ramp_per_s: f64,
    /// Relative slow wander amplitude and period.
    pub wander_amp: f64,
    pub wander_period_s: f64,
}

impl BiasModel {
    pub fn none() -> Self {
        BiasModel {
            alpha0: 0.0,
            beta0: 0.0,
            alpha_per_lo: 0.0,
            beta_per_lo: 0.0,
            ramp_per_s: 0.0,
            wander_amp: 0.0,
            wander_period_s: 1.0,
        }
    }

    fn wander(&self, t_s: f64) -> f64 {
        if self.wander_amp == 0.0 {
            1.0
        } else {
            1.0 + self.wander_amp * (2.0 * core::f64::consts::PI * t_s / self.wander_period_s).sin()
        }
    }

    pub fn alpha(&self, t_s: f64, lo_rel: f64) -> f64 {
        (self.alpha0 + self.alpha_per_lo * (lo_rel - 1.0)) * self.wander(t_s) + self.ramp_per_s * t_s
    }

    pub fn beta(&self, t_s: f64, lo_rel: f64) -> f64 {
        (self.beta0 + self.beta_per_lo * (lo_rel - 1.0)) * self.wander(t_s) + self.ramp_per_s * t_s
    }
}

impl Default for BiasModel {
    fn default() -> Self {
        BiasModel {
            alpha0: 12.0,
            beta0: -9.0,
            alpha_per_lo: 3.0,
            beta_per_lo: -2.0,
            ramp_per_s: 0.0,
            wander_amp: 0.02,
            wander_period_s: 600.0,
        }
    }
}

/// One captured period: raw ADC samples for the four bins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseFrame {
    pub index: u64,
    pub t_ns: f64,
    pub signal: QuadSample,
    pub reference: QuadSample,
    pub clone_signal: QuadSample,
    pub clone_reference: QuadSample,
    /// True once the live bins hold clone-differenced (control-path) values.
    pub control_path: bool,
}

/// Heterodyne measurement of one time-bin, producing raw ADC counts.
///
/// The quadrature means are `sqrt(eta/2)` times the incoming SNU quadratures,
/// with unit shot-plus-vacuum noise per quadrature scaling with the LO power
/// and LO-independent electrical noise, plus the bias offsets.
pub fn measure_bin(
    incoming: CoherentAmplitude,
    lo_rel: f64,
    det: &DetectorConstants,
    bias: &BiasModel,
    t_s: f64,
    counts_per_snu: f64,
    noise: &mut EntropySource,
) -> Result<QuadSample> {
    if !(lo_rel >= 0.0) || !(counts_per_snu > 0.0) {
        return Err(Error::Calibration("bad LO power or ADC scale"));
    }
    let (x_in, p_in) = incoming.quadratures();
    let gain = (det.eta() / 2.0).sqrt();
    let (shot_x, shot_p) = standard_pair(noise)?;
    let (elec_x, elec_p) = standard_pair(noise)?;
    let s = lo_rel.sqrt();
    let e = det.nu_e.sqrt();
    let x = counts_per_snu * (s * (gain * x_in + shot_x) + e * elec_x) + bias.alpha(t_s, lo_rel);
    let p = counts_per_snu * (s * (gain * p_in + shot_p) + e * elec_p) + bias.beta(t_s, lo_rel);
    Ok(QuadSample::adc(x, p))
}

/// Control-path bias correction: difference each live bin against its clone
/// 500 ns away. Cancels the bias exactly for static offsets and doubles the
/// noise variance; the result is flagged control-path-only.
pub fn bias_correct(frame: &PulseFrame) -> Result<PulseFrame> {
    if frame.control_path {
        return Err(Error::Framing("frame already clone-differenced"));
    }
    let diff = |a: &QuadSample, b: &QuadSample| QuadSample {
        x: a.x - b.x,
        p: a.p - b.p,
        units: a.units,
    };
    Ok(PulseFrame {
        signal: diff(&frame.signal, &frame.clone_signal),
        reference: diff(&frame.reference, &frame.clone_reference),
        clone_signal: QuadSample { x: 0.0, p: 0.0, units: frame.clone_signal.units },
        clone_reference: QuadSample { x: 0.0, p: 0.0, units: frame.clone_reference.units },
        control_path: true,
        ..*frame
    })
}

fn pooled_variance(samples: impl Iterator<Item = (f64, f64)>) -> (f64, usize) {
    let mut n = 0usize;
    let (mut sx, mut sx2) = (0.0, 0.0);
    let (mut sp, mut sp2) = (0.0, 0.0);
    for (x, p) in samples {
        n += 1;
        sx += x;
        sx2 += x * x;
        sp += p;
        sp2 += p * p;
    }
    if n < 2 {
        return (0.0, n);
    }
    let nf = n as f64;
    let vx = (sx2 - sx * sx / nf) / (nf - 1.0);
    let vp = (sp2 - sp * sp / nf) / (nf - 1.0);
    ((vx + vp) / 2.0, n)
}

/// Shot and electrical noise in Z units (ADC counts squared) from vacuum
/// clone-signal bins: `z_shot` from LO-on frames after subtracting the
/// electrical variance measured with the LO off.
pub fn shot_noise_calibration(
    lo_on: &[PulseFrame],
    lo_off: &[PulseFrame],
) -> Result<(f64, f64)> {
    if lo_on.len() < MIN_CALIBRATION_FRAMES || lo_off.len() < MIN_CALIBRATION_FRAMES {
        return Err(Error::Calibration("too few frames for noise calibration"));
    }
    let (on_var, _) = pooled_variance(lo_on.iter().map(|f| (f.clone_signal.x, f.clone_signal.p)));
    let (off_var, _) = pooled_variance(lo_off.iter().map(|f| (f.clone_signal.x, f.clone_signal.p)));
    let z_elec = 2.0 * off_var;
    let z_shot = 2.0 * on_var - z_elec;
    if z_shot <= 0.0 {
        return Err(Error::Calibration("shot variance not positive after electrical subtraction"));
    }
    Ok((z_shot, z_elec))
}

/// Receiver unit calibration: per-quadrature shot and electrical variances
/// in ADC counts squared at the current LO power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnuCalibration {
    pub shot_var_adc: f64,
    pub elec_var_adc: f64,
    pub frames_used: usize,
}

impl SnuCalibration {
    pub fn from_z(z_shot: f64, z_elec: f64, frames: usize) -> Result<Self> {
        if z_shot <= 0.0 || z_elec < 0.0 {
            return Err(Error::Calibration("non-positive shot calibration"));
        }
        Ok(SnuCalibration {
            shot_var_adc: z_shot / 2.0,
            elec_var_adc: z_elec / 2.0,
            frames_used: frames,
        })
    }

    /// Electrical noise in SNU.
    pub fn nu_e_hat(&self) -> f64 {
        self.elec_var_adc / self.shot_var_adc
    }

    /// Z contribution of shot noise in SNU (both quadratures).
    pub fn z_shot_snu(&self) -> f64 {
        2.0
    }

    pub fn z_elec_snu(&self) -> f64 {
        2.0 * self.nu_e_hat()
    }

    pub fn to_snu(&self, sample: &QuadSample) -> QuadSample {
        debug_assert_eq!(sample.units, Units::AdcCounts);
        let s = self.shot_var_adc.sqrt();
        QuadSample::snu(sample.x / s, sample.p / s)
    }
}

/// Streaming mean/variance accumulator for calibration over long runs.
#[derive(Debug, Clone, Copy, Default)]
pub struct VarAccumulator {
    n: f64,
    sx: f64,
    sx2: f64,
    sp: f64,
    sp2: f64,
}

impl VarAccumulator {
    pub fn push(&mut self, x: f64, p: f64) {
        self.n += 1.0;
        self.sx += x;
        self.sx2 += x * x;
        self.sp += p;
        self.sp2 += p * p;
    }

    pub fn count(&self) -> usize {
        self.n as usize
    }

    pub fn mean(&self) -> (f64, f64) {
        (self.sx / self.n, self.sp / self.n)
    }

    /// Pooled per-quadrature sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2.0 {
            return 0.0;
        }
        let vx = (self.sx2 - self.sx * self.sx / self.n) / (self.n - 1.0);
        let vp = (self.sp2 - self.sp * self.sp / self.n) / (self.n - 1.0);
        (vx + vp) / 2.0
    }

    /// Mean of Z = x^2 + p^2 over the accumulated samples.
    pub fn mean_z(&self) -> f64 {
        (self.sx2 + self.sp2) / self.n
    }
}

/// Collect vacuum statistics into a calibration, given accumulators filled
/// from clone-signal bins with the LO on and any bins with the LO off.
pub fn calibration_from_accumulators(
    lo_on: &VarAccumulator,
    lo_off: &VarAccumulator,
) -> Result<SnuCalibration> {
    if lo_on.count() < MIN_CALIBRATION_FRAMES || lo_off.count() < MIN_CALIBRATION_FRAMES {
        return Err(Error::Calibration("too few frames for noise calibration"));
    }
    let elec = lo_off.variance();
    let shot = lo_on.variance() - elec;
    if shot <= 0.0 {
        return Err(Error::Calibration("shot variance not positive after electrical subtraction"));
    }
    Ok(SnuCalibration {
        shot_var_adc: shot,
        elec_var_adc: elec,
        frames_used: lo_on.count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dark_frame_pair(
        det: &DetectorConstants,
        bias: &BiasModel,
        lo_rel: f64,
        t_s: f64,
        idx: u64,
        g: f64,
        noise: &mut EntropySource,
    ) -> PulseFrame {
        let dark = CoherentAmplitude::DARK;
        PulseFrame {
            index: idx,
            t_ns: t_s * 1e9,
            signal: measure_bin(dark, lo_rel, det, bias, t_s, g, noise).unwrap(),
            reference: measure_bin(dark, lo_rel, det, bias, t_s, g, noise).unwrap(),
            clone_signal: measure_bin(dark, lo_rel, det, bias, t_s + 5e-7, g, noise).unwrap(),
            clone_reference: measure_bin(dark, lo_rel, det, bias, t_s + 5e-7, g, noise).unwrap(),
            control_path: false,
        }
    }

    #[test]
    fn vacuum_variance_is_shot_plus_electrical() {
        let det = DetectorConstants::default();
        let bias = BiasModel::none();
        let mut src = EntropySource::seeded(21);
        let g = 64.0;
        let mut acc = VarAccumulator::default();
        for i in 0..40_000 {
            let s = measure_bin(CoherentAmplitude::DARK, 1.0, &det, &bias, i as f64 * 1e-6, g, &mut src)
                .unwrap();
            acc.push(s.x, s.p);
        }
        let expect = g * g * (1.0 + det.nu_e);
        let var = acc.variance();
        assert!((var / expect - 1.0).abs() < 0.03, "var {var} expect {expect}");
    }

    #[test]
    fn constant_bias_offsets_every_bin() {
        let det = DetectorConstants::default();
        let bias = BiasModel { alpha0: 7.0, beta0: -3.0, ..BiasModel::none() };
        let mut src = EntropySource::seeded(22);
        let mut acc = VarAccumulator::default();
        for i in 0..40_000 {
            let s = measure_bin(CoherentAmplitude::DARK, 1.0, &det, &bias, i as f64 * 1e-6, 64.0, &mut src)
                .unwrap();
            acc.push(s.x, s.p);
        }
        let (mx, mp) = acc.mean();
        assert!((mx - 7.0).abs() < 0.8, "mean x {mx}");
        assert!((mp + 3.0).abs() < 0.8, "mean p {mp}");
    }

    #[test]
    fn static_bias_cancels_exactly_in_control_path() {
        let det = DetectorConstants { nu_e: 0.0, ..DetectorConstants::default() };
        let bias = BiasModel { alpha0: 35.0, beta0: -18.0, ..BiasModel::none() };
        // noise off: zero LO power removes shot noise, nu_e = 0 removes elec
        let mut src = EntropySource::seeded(23);
        let f = dark_frame_pair(&det, &bias, 0.0, 1.0, 0, 64.0, &mut src);
        let c = bias_correct(&f).unwrap();
        assert_eq!(c.signal.x, 0.0);
        assert_eq!(c.signal.p, 0.0);
        assert!(c.control_path);
        assert!(bias_correct(&c).is_err());
    }

    #[test]
    fn control_path_doubles_vacuum_variance() {
        let det = DetectorConstants::default();
        let bias = BiasModel::default();
        let mut src = EntropySource::seeded(24);
        let mut raw = VarAccumulator::default();
        let mut ctrl = VarAccumulator::default();
        for i in 0..60_000 {
            let f = dark_frame_pair(&det, &bias, 1.0, i as f64 * 1e-6, i, 64.0, &mut src);
            let c = bias_correct(&f).unwrap();
            raw.push(f.signal.x, f.signal.p);
            ctrl.push(c.signal.x, c.signal.p);
        }
        let ratio = ctrl.variance() / raw.variance();
        assert!((ratio - 2.0).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn bias_ramp_leaves_linear_residual() {
        let det = DetectorConstants { nu_e: 0.0, ..DetectorConstants::default() };
        let rate = 2000.0; // counts per second
        let bias = BiasModel { ramp_per_s: rate, ..BiasModel::none() };
        let mut src = EntropySource::seeded(25);
        // clone measured 500 ns after the live bin: residual = -rate * 500ns
        let f = dark_frame_pair(&det, &bias, 0.0, 0.5, 0, 64.0, &mut src);
        let c = bias_correct(&f).unwrap();
        let expect = -rate * 5e-7;
        assert!((c.signal.x - expect).abs() < 1e-9, "residual {}", c.signal.x);
    }

    #[test]
    fn shot_calibration_recovers_known_noise() {
        let det = DetectorConstants::default();
        let bias = BiasModel::default();
        let g = 64.0;
        let mut src = EntropySource::seeded(26);
        let on: Vec<_> = (0..10_000)
            .map(|i| dark_frame_pair(&det, &bias, 1.0, i as f64 * 1e-6, i, g, &mut src))
            .collect();
        let off: Vec<_> = (0..10_000)
            .map(|i| dark_frame_pair(&det, &bias, 0.0, i as f64 * 1e-6, i, g, &mut src))
            .collect();
        let (z_shot, z_elec) = shot_noise_calibration(&on, &off).unwrap();
        let shot_true = 2.0 * g * g;
        let elec_true = 2.0 * g * g * det.nu_e;
        assert!((z_shot / shot_true - 1.0).abs() < 0.03, "z_shot {z_shot}");
        assert!((z_elec / elec_true - 1.0).abs() < 0.03, "z_elec {z_elec}");
        let cal = SnuCalibration::from_z(z_shot, z_elec, 10_000).unwrap();
        assert!((cal.nu_e_hat() - det.nu_e).abs() < 0.01);
    }

    #[test]
    fn shot_scales_linearly_with_lo_power() {
        let det = DetectorConstants::default();
        let bias = BiasModel::none();
        let g = 64.0;
        let mut src = EntropySource::seeded(27);
        let mut var_at = |rel: f64| {
            let mut acc = VarAccumulator::default();
            for i in 0..30_000 {
                let s = measure_bin(CoherentAmplitude::DARK, rel, &det, &bias, i as f64 * 1e-6, g, &mut src)
                    .unwrap();
                acc.push(s.x, s.p);
            }
            acc.variance() - g * g * det.nu_e
        };
        let v1 = var_at(1.0);
        let v2 = var_at(2.0);
        assert!((v2 / v1 - 2.0).abs() < 0.06, "ratio {}", v2 / v1);
        // dark detector: zero LO power leaves only electrical noise
        let v0 = var_at(0.0);
        assert!(v0.abs() < 0.05 * g * g, "residual shot {v0}");
    }

    #[test]
    fn too_few_frames_is_an_error() {
        let frames: Vec<PulseFrame> = Vec::new();
        assert!(shot_noise_calibration(&frames, &frames).is_err());
    }
}
