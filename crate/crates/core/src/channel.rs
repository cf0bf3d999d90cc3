//! Fiber link model: attenuation, fast carrier phase between Alice's source
//! and Bob's local oscillator, the slowly varying signal-reference offset
//! delta, polarization drift, and clock frequency offset.
//!
//! The per-symbol phase jitter between a signal pulse and its paired
//! reference realizes the phase-noise variance `phase_variance`; it is drawn
//! fresh every period and applied only to the signal bin, while the carrier
//! random walk is common to both bins of a period.

#[allow(unused_imports)]
use num_traits::Float;

use crate::cplx::{wrap_angle, Jones, PolUnitary};
use crate::rng::{standard_pair, EntropySource};
use crate::{Error, Result};

/// Static link parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    pub distance_km: f64,
    pub atten_db_per_km: f64,
    pub fixed_loss_db: f64,
    /// Per-symbol signal-reference phase jitter variance (rad^2); this is the
    /// residual phase variance the estimation pipeline should recover.
    pub phase_variance: f64,
    /// Carrier-phase random-walk rate between the two free-running lasers
    /// (rad^2 per second).
    pub carrier_walk: f64,
    /// Deterministic drift rate of the signal-reference offset delta (rad/s).
    pub delta_drift_rate: f64,
    /// Deterministic polarization drift rate (rad/s) on the fading axis.
    pub pol_drift_rate: f64,
    /// Random polarization walk (rad per sqrt second) on each axis.
    pub pol_walk: f64,
    /// Alice-vs-Bob clock frequency offset in parts per million.
    pub clock_offset_ppm: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        // 10.4 km loop-back: 8 dB total loss.
        ChannelParams {
            distance_km: 10.4,
            atten_db_per_km: 0.2,
            fixed_loss_db: 5.92,
            phase_variance: 0.034,
            carrier_walk: 100.0,
            delta_drift_rate: 0.5,
            pol_drift_rate: 1.5e-5,
            pol_walk: 1e-4,
            clock_offset_ppm: 2.0,
        }
    }
}

impl ChannelParams {
    /// Power transmission `10^(-(atten * distance + fixed) / 10)`.
    pub fn transmission(&self) -> f64 {
        10f64.powf(-(self.atten_db_per_km * self.distance_km + self.fixed_loss_db) / 10.0)
    }

    pub fn total_loss_db(&self) -> f64 {
        self.atten_db_per_km * self.distance_km + self.fixed_loss_db
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.distance_km >= 0.0
            && self.atten_db_per_km >= 0.0
            && self.fixed_loss_db >= 0.0
            && self.phase_variance >= 0.0
            && self.carrier_walk >= 0.0
            && self.pol_walk >= 0.0;
        if ok && self.transmission() > 0.0 {
            Ok(())
        } else {
            Err(Error::NumericalDomain("channel parameters out of range"))
        }
    }
}

/// Time-varying channel state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelState {
    /// Fast relative phase between Alice's carrier and Bob's LO.
    pub carrier_phase: f64,
    /// Slow phase offset between the signal and reference paths.
    pub delta: f64,
    /// Birefringence rotation angles about the three Pauli axes.
    pub pol_angles: [f64; 3],
    /// Accumulated Alice-vs-Bob timing skew in nanoseconds.
    pub clock_skew_ns: f64,
    /// Jitter applied to the current period's signal bin.
    pub signal_jitter: f64,
}

impl ChannelState {
    pub fn new(carrier_phase: f64, delta: f64, pol_angles: [f64; 3], skew_ns: f64) -> Self {
        ChannelState {
            carrier_phase: wrap_angle(carrier_phase),
            delta: wrap_angle(delta),
            pol_angles,
            clock_skew_ns: skew_ns,
            signal_jitter: 0.0,
        }
    }

    /// Birefringence unitary: Z-X-Z composition of the three angles.
    pub fn pol_unitary(&self) -> PolUnitary {
        PolUnitary::rot_z(self.pol_angles[2])
            .compose(&PolUnitary::rot_x(self.pol_angles[1]))
            .compose(&PolUnitary::rot_z(self.pol_angles[0]))
    }
}

impl Default for ChannelState {
    fn default() -> Self {
        ChannelState::new(0.0, 0.0, [0.0; 3], 0.0)
    }
}

/// Which phase a pulse picks up in the channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PulseKind {
    /// Signal-bin pulse: carrier + delta + per-symbol jitter.
    Signal,
    /// Reference-bin pulse: carrier only.
    Reference,
    /// CW floor light: carrier only.
    Floor,
}

/// Propagate a two-polarization pulse through the link: amplitude scaling by
/// `sqrt(T)`, phase rotation, and the birefringence unitary.
pub fn transmit(
    pulse: &Jones,
    kind: PulseKind,
    state: &ChannelState,
    params: &ChannelParams,
) -> Jones {
    let amp = params.transmission().sqrt();
    let phase = match kind {
        PulseKind::Signal => state.carrier_phase + state.delta + state.signal_jitter,
        PulseKind::Reference | PulseKind::Floor => state.carrier_phase,
    };
    state.pol_unitary().apply(&pulse.scale(amp).rotated(phase))
}

/// Advance the channel state by `dt` seconds.
pub fn advance(
    state: &mut ChannelState,
    dt: f64,
    params: &ChannelParams,
    noise: &mut EntropySource,
) -> Result<()> {
    if !(dt > 0.0) {
        return Err(Error::NumericalDomain("advance needs dt > 0"));
    }
    if params.carrier_walk > 0.0 || params.phase_variance > 0.0 {
        let (g_walk, g_jit) = standard_pair(noise)?;
        if params.carrier_walk > 0.0 {
            state.carrier_phase =
                wrap_angle(state.carrier_phase + (params.carrier_walk * dt).sqrt() * g_walk);
        }
        state.signal_jitter = if params.phase_variance > 0.0 {
            params.phase_variance.sqrt() * g_jit
        } else {
            0.0
        };
    } else {
        state.signal_jitter = 0.0;
    }

    state.delta = wrap_angle(state.delta + params.delta_drift_rate * dt);

    if params.pol_walk > 0.0 {
        let (g0, g1) = standard_pair(noise)?;
        let (g2, _) = standard_pair(noise)?;
        let w = params.pol_walk * dt.sqrt();
        state.pol_angles[0] += w * g0;
        state.pol_angles[1] += w * g1;
        state.pol_angles[2] += w * g2;
    }
    state.pol_angles[1] += params.pol_drift_rate * dt;
    for a in &mut state.pol_angles {
        *a = wrap_angle(*a);
    }

    state.clock_skew_ns += params.clock_offset_ppm * dt * 1e3;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cplx::Cx;
    use crate::tx::CoherentAmplitude;

    fn jones_of(sig: CoherentAmplitude) -> Jones {
        Jones::new(sig.as_cx(), Cx::ZERO)
    }

    #[test]
    fn identity_channel_passes_through() {
        let params = ChannelParams {
            distance_km: 0.0,
            fixed_loss_db: 0.0,
            ..ChannelParams::default()
        };
        let state = ChannelState::default();
        let v = jones_of(CoherentAmplitude::new(0.7, -0.2));
        let out = transmit(&v, PulseKind::Reference, &state, &params);
        assert!((out.s.re - 0.7).abs() < 1e-12);
        assert!((out.s.im + 0.2).abs() < 1e-12);
        assert!(out.r.abs() < 1e-12);
    }

    #[test]
    fn eight_db_loss_photon_scale() {
        let params = ChannelParams::default();
        assert!((params.total_loss_db() - 8.0).abs() < 1e-9);
        let n_in = 1000.0;
        let v = jones_of(CoherentAmplitude::from_photons(n_in, 0.3));
        let out = transmit(&v, PulseKind::Reference, &ChannelState::default(), &params);
        let n_out = 2.0 * out.s.abs2();
        assert!((n_out / n_in - 0.15849).abs() < 1e-4, "scale {}", n_out / n_in);
    }

    #[test]
    fn p2p_link_reference_attenuation() {
        // 3.2 dB -> 1000 photons arrive as 478.6
        let params = ChannelParams {
            distance_km: 5.2,
            atten_db_per_km: 0.2,
            fixed_loss_db: 3.2 - 5.2 * 0.2,
            ..ChannelParams::default()
        };
        let v = jones_of(CoherentAmplitude::from_photons(1000.0, 0.0));
        let out = transmit(&v, PulseKind::Reference, &ChannelState::default(), &params);
        assert!((2.0 * out.s.abs2() - 478.63).abs() < 0.01);
    }

    #[test]
    fn loss_composes_in_photon_number() {
        let base = ChannelParams { fixed_loss_db: 0.0, ..ChannelParams::default() };
        let d1 = ChannelParams { distance_km: 7.3, ..base };
        let d2 = ChannelParams { distance_km: 4.1, ..base };
        let dsum = ChannelParams { distance_km: 11.4, ..base };
        let state = ChannelState::default();
        let v = jones_of(CoherentAmplitude::from_photons(123.0, 0.9));
        let two = transmit(&transmit(&v, PulseKind::Floor, &state, &d1), PulseKind::Floor, &state, &d2);
        let one = transmit(&v, PulseKind::Floor, &state, &dsum);
        assert!((two.s.abs2() - one.s.abs2()).abs() / one.s.abs2() < 1e-12);
    }

    #[test]
    fn phase_preserves_photon_number() {
        let params = ChannelParams::default();
        let mut state = ChannelState::default();
        state.carrier_phase = 1.234;
        state.delta = -0.77;
        state.signal_jitter = 0.05;
        let v = jones_of(CoherentAmplitude::from_photons(55.0, 0.4));
        let out = transmit(&v, PulseKind::Signal, &state, &params);
        let expect = 55.0 * params.transmission();
        assert!((2.0 * (out.s.abs2() + out.r.abs2()) - expect).abs() < 1e-9);
    }

    #[test]
    fn frozen_channel_only_accumulates_skew() {
        let params = ChannelParams {
            phase_variance: 0.0,
            carrier_walk: 0.0,
            delta_drift_rate: 0.0,
            pol_drift_rate: 0.0,
            pol_walk: 0.0,
            clock_offset_ppm: 20.0,
            ..ChannelParams::default()
        };
        let mut state = ChannelState::default();
        let mut src = EntropySource::seeded(1);
        for _ in 0..1000 {
            advance(&mut state, 1e-6, &params, &mut src).unwrap();
        }
        assert_eq!(state.carrier_phase, 0.0);
        assert_eq!(state.delta, 0.0);
        assert_eq!(state.pol_angles, [0.0; 3]);
        // 20 ppm over 1000 periods of 1 us = 0.02 ns each, 20 ns total
        assert!((state.clock_skew_ns - 20.0).abs() < 1e-9);
    }

    #[test]
    fn delta_stays_packet_constant() {
        // default drift keeps delta within 0.01 rad over 10 ms
        let params = ChannelParams::default();
        let mut state = ChannelState::default();
        let mut src = EntropySource::seeded(2);
        let d0 = state.delta;
        for _ in 0..10_000 {
            advance(&mut state, 1e-6, &params, &mut src).unwrap();
        }
        assert!((state.delta - d0).abs() < 0.01, "delta moved {}", (state.delta - d0).abs());
    }
}
