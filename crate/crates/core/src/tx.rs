//! Alice's pulse train: Gaussian symbol encoding through the bias-free
//! Sagnac phase-amplitude modulator, packet assembly, and pulse carving with
//! finite extinction.
//!
//! Quadrature convention: `X = 2 Re(alpha)`, `P = 2 Im(alpha)`, so vacuum
//! variance is 1 SNU per quadrature. Pulse energies are bookkept as
//! `photons = (X^2 + P^2) / 2`, which is the quantity the receiver's Z-based
//! photon estimator reports; all pulse-energy knobs in this crate use that
//! same unit.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::cplx::{wrap_angle, Cx};
use crate::rng::GaussianPair;
use crate::{Error, Result};

/// Number of Gaussian payload symbols per packet.
pub const PAYLOAD_SYMBOLS: usize = 8192;
/// Header and footer length in symbols (one pattern bit per symbol).
pub const PATTERN_SYMBOLS: usize = 64;
/// Packet-ID length in symbols (one bit per symbol).
pub const ID_SYMBOLS: usize = 64;
/// Marker + header + id + payload + footer.
pub const PACKET_SYMBOLS: usize = 1 + 2 * PATTERN_SYMBOLS + ID_SYMBOLS + PAYLOAD_SYMBOLS;

/// Default 64-bit synchronization pattern shared by both ends: a 63-bit
/// maximal-length sequence (x^6 + x^5 + 1) with a trailing zero.
pub const SYNC_PATTERN: u64 = 0xFC10_C53D_1C96_ECD4;

/// Mean-field amplitude of a coherent pulse.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CoherentAmplitude {
    pub re: f64,
    pub im: f64,
}

impl CoherentAmplitude {
    pub const DARK: CoherentAmplitude = CoherentAmplitude { re: 0.0, im: 0.0 };

    pub fn new(re: f64, im: f64) -> Self {
        CoherentAmplitude { re, im }
    }

    /// Pulse with the given photon number and optical phase.
    pub fn from_photons(photons: f64, phase: f64) -> Self {
        let mag = (photons / 2.0).max(0.0).sqrt();
        CoherentAmplitude::new(mag * phase.cos(), mag * phase.sin())
    }

    /// Amplitude whose measured quadrature means are `(x, p)` in SNU.
    pub fn from_quadratures(x: f64, p: f64) -> Self {
        CoherentAmplitude::new(x / 2.0, p / 2.0)
    }

    /// Quadrature means `(X, P) = (2 Re, 2 Im)` in SNU.
    pub fn quadratures(&self) -> (f64, f64) {
        (2.0 * self.re, 2.0 * self.im)
    }

    /// Photon number, `(X^2 + P^2) / 2`.
    pub fn photons(&self) -> f64 {
        2.0 * (self.re * self.re + self.im * self.im)
    }

    pub fn magnitude(&self) -> f64 {
        (self.re * self.re + self.im * self.im).sqrt()
    }

    pub fn rotated(&self, phase: f64) -> Self {
        let c = self.as_cx().rotated(phase);
        CoherentAmplitude::new(c.re, c.im)
    }

    pub fn scaled(&self, f: f64) -> Self {
        CoherentAmplitude::new(self.re * f, self.im * f)
    }

    pub fn as_cx(&self) -> Cx {
        Cx::new(self.re, self.im)
    }
}

/// Drive phases applied to the clockwise and counter-clockwise passes of the
/// Sagnac loop, each normalized to `[-pi, pi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SagnacDrive {
    pub phi_cw: f64,
    pub phi_ccw: f64,
}

impl SagnacDrive {
    pub fn new(phi_cw: f64, phi_ccw: f64) -> Self {
        SagnacDrive { phi_cw: wrap_angle(phi_cw), phi_ccw: wrap_angle(phi_ccw) }
    }
}

/// Output of the asymmetric-loop modulator:
/// `e^{i (phi_cw + phi_ccw) / 2} sin((phi_cw - phi_ccw) / 2) * alpha_in`.
pub fn sagnac_output(alpha_in: CoherentAmplitude, drive: &SagnacDrive) -> CoherentAmplitude {
    let mean = (drive.phi_cw + drive.phi_ccw) / 2.0;
    let half_diff = (drive.phi_cw - drive.phi_ccw) / 2.0;
    let out = alpha_in.as_cx().scale(half_diff.sin()).rotated(mean);
    CoherentAmplitude::new(out.re, out.im)
}

/// Drive phases that make the modulator emit the target quadratures
/// `(x_a, p_a)` from the available input amplitude. The target is reachable
/// when `sqrt(x_a^2 + p_a^2) / 2 <= |alpha_in|`.
pub fn drive_for_target(
    x_a: f64,
    p_a: f64,
    alpha_in: CoherentAmplitude,
) -> Result<SagnacDrive> {
    let target = CoherentAmplitude::from_quadratures(x_a, p_a);
    let want = target.magnitude();
    let have = alpha_in.magnitude();
    if want == 0.0 {
        return Ok(SagnacDrive::new(0.0, 0.0));
    }
    if want > have * (1.0 + 1e-12) {
        return Err(Error::Encoding("target amplitude exceeds modulator input"));
    }
    let ratio = (want / have).min(1.0);
    let half_diff = ratio.asin();
    let mean = target.as_cx().arg() - alpha_in.as_cx().arg();
    Ok(SagnacDrive::new(mean + half_diff, mean - half_diff))
}

/// SNU per digital encoding unit: `X_A = k * digital`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncodingScale {
    pub k: f64,
}

impl EncodingScale {
    pub fn new(k: f64) -> Result<Self> {
        if k > 0.0 && k.is_finite() {
            Ok(EncodingScale { k })
        } else {
            Err(Error::Encoding("encoding scale must be positive"))
        }
    }

    /// Scale for a target modulation variance given the digital variance.
    pub fn for_va(v_a: f64, digital_variance: f64) -> Result<Self> {
        EncodingScale::new((v_a / digital_variance).sqrt())
    }
}

/// Timing and energy layout of the 1 MHz pulse train.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TxPulseSpec {
    /// Typical signal-pulse photon number (equal to the modulation variance).
    pub signal_photons: f64,
    pub reference_photons: f64,
    pub header_photons: f64,
    /// Packet-start marker brightness relative to a normal reference pulse.
    pub marker_factor: f64,
    pub pulse_width_ns: f64,
    pub period_ns: f64,
    pub signal_reference_gap_ns: f64,
}

impl Default for TxPulseSpec {
    fn default() -> Self {
        TxPulseSpec {
            signal_photons: 1.0,
            reference_photons: 1000.0,
            header_photons: 100.0,
            marker_factor: 4.0,
            pulse_width_ns: 12.0,
            period_ns: 1000.0,
            signal_reference_gap_ns: 100.0,
        }
    }
}

impl TxPulseSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = self.signal_photons >= 0.0
            && self.reference_photons >= 0.0
            && self.header_photons >= 0.0
            && self.marker_factor >= 2.0
            && self.pulse_width_ns > 0.0
            && self.signal_reference_gap_ns < self.period_ns;
        if ok {
            Ok(())
        } else {
            Err(Error::Encoding("pulse spec out of range"))
        }
    }
}

/// Role of one symbol slot inside a packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymbolRole {
    Marker,
    Header,
    Id,
    Payload,
    Footer,
}

/// One symbol slot: target quadratures for the signal pulse of that period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketSymbol {
    pub role: SymbolRole,
    pub x_a: f64,
    pub p_a: f64,
    pub photons: f64,
}

/// A CV-QKD packet: bright marker, 64 binary-phase header symbols, 64 ID
/// symbols, 8192 Gaussian payload symbols, 64 footer symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct Packet {
    pub id: u64,
    pub symbols: Vec<PacketSymbol>,
}

fn pattern_bit(pattern: u64, index: usize) -> bool {
    (pattern >> (63 - index)) & 1 == 1
}

fn bpsk_symbol(role: SymbolRole, bit: bool, photons: f64) -> PacketSymbol {
    // bit 0 -> phase 0, bit 1 -> phase pi
    let x = if bit { -(2.0 * photons).sqrt() } else { (2.0 * photons).sqrt() };
    PacketSymbol { role, x_a: x, p_a: 0.0, photons }
}

/// Assemble a packet from exactly [`PAYLOAD_SYMBOLS`] Gaussian pairs.
pub fn build_packet(
    payload: &[GaussianPair],
    id: u64,
    pattern: u64,
    scale: &EncodingScale,
    spec: &TxPulseSpec,
) -> Result<Packet> {
    spec.validate()?;
    if payload.len() != PAYLOAD_SYMBOLS {
        return Err(Error::Framing("payload must contain exactly 8192 symbols"));
    }
    let mut symbols = Vec::with_capacity(PACKET_SYMBOLS);
    symbols.push(PacketSymbol { role: SymbolRole::Marker, x_a: 0.0, p_a: 0.0, photons: 0.0 });
    for i in 0..PATTERN_SYMBOLS {
        symbols.push(bpsk_symbol(SymbolRole::Header, pattern_bit(pattern, i), spec.header_photons));
    }
    for i in 0..ID_SYMBOLS {
        symbols.push(bpsk_symbol(SymbolRole::Id, pattern_bit(id, i), spec.header_photons));
    }
    for pair in payload {
        let (x, p) = (scale.k * pair.x, scale.k * pair.p);
        symbols.push(PacketSymbol {
            role: SymbolRole::Payload,
            x_a: x,
            p_a: p,
            photons: (x * x + p * p) / 2.0,
        });
    }
    for i in 0..PATTERN_SYMBOLS {
        symbols.push(bpsk_symbol(SymbolRole::Footer, pattern_bit(pattern, i), spec.header_photons));
    }
    Ok(Packet { id, symbols })
}

/// What Alice launches during one 1 us period: an encoded signal-polarization
/// pulse, a reference-polarization pulse with zero phase encoding, and the
/// CW extinction floor of the reference path that leaks into every time-bin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TxFrame {
    pub signal: CoherentAmplitude,
    pub reference: CoherentAmplitude,
    pub floor: CoherentAmplitude,
}

fn extinction_floor(spec: &TxPulseSpec, extinction_db: f64) -> CoherentAmplitude {
    if extinction_db.is_infinite() {
        return CoherentAmplitude::DARK;
    }
    let photons = spec.reference_photons * 10f64.powf(-extinction_db / 10.0);
    CoherentAmplitude::from_photons(photons, 0.0)
}

/// An idle period: dark signal bin, normal reference pulse.
pub fn idle_frame(spec: &TxPulseSpec, extinction_db: f64) -> TxFrame {
    TxFrame {
        signal: CoherentAmplitude::DARK,
        reference: CoherentAmplitude::from_photons(spec.reference_photons, 0.0),
        floor: extinction_floor(spec, extinction_db),
    }
}

/// Realize a packet as per-period pulse amplitudes. Every signal pulse goes
/// through the Sagnac encode path (drive solve plus forward model); the
/// marker period carries a reference pulse `marker_factor` times brighter.
pub fn carve_pulses(
    packet: &Packet,
    spec: &TxPulseSpec,
    extinction_db: f64,
) -> Result<Vec<TxFrame>> {
    spec.validate()?;
    let floor = extinction_floor(spec, extinction_db);
    let peak = packet
        .symbols
        .iter()
        .map(|s| s.photons)
        .fold(spec.header_photons, f64::max);
    let alpha_in = CoherentAmplitude::from_photons(peak.max(1e-12), 0.0);
    let reference = CoherentAmplitude::from_photons(spec.reference_photons, 0.0);
    let marker_ref =
        CoherentAmplitude::from_photons(spec.marker_factor * spec.reference_photons, 0.0);
    let mut frames = Vec::with_capacity(packet.symbols.len());
    for sym in &packet.symbols {
        let signal = if sym.photons == 0.0 {
            CoherentAmplitude::DARK
        } else {
            let drive = drive_for_target(sym.x_a, sym.p_a, alpha_in)?;
            sagnac_output(alpha_in, &drive)
        };
        frames.push(TxFrame {
            signal,
            reference: if sym.role == SymbolRole::Marker { marker_ref } else { reference },
            floor,
        });
    }
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{gaussian_pair, EntropySource};
    use core::f64::consts::PI;

    #[test]
    fn sagnac_dark_and_full() {
        let a = CoherentAmplitude::new(0.8, -0.3);
        let dark = sagnac_output(a, &SagnacDrive::new(0.4, 0.4));
        assert!(dark.magnitude() < 1e-15);

        // phi_cw = pi, phi_ccw = 0 -> i * alpha
        let full = sagnac_output(a, &SagnacDrive::new(PI, 0.0));
        assert!((full.re - (-a.im)).abs() < 1e-12);
        assert!((full.im - a.re).abs() < 1e-12);

        // zero-mean drive passes the amplitude through unchanged
        let through = sagnac_output(CoherentAmplitude::new(1.0, 0.0), &SagnacDrive::new(PI / 2.0, -PI / 2.0));
        assert!((through.re - 1.0).abs() < 1e-12);
        assert!(through.im.abs() < 1e-12);
    }

    #[test]
    fn drive_round_trip() {
        let alpha_in = CoherentAmplitude::from_photons(50.0, 0.0);
        let mut src = EntropySource::seeded(3);
        for _ in 0..200 {
            let g = gaussian_pair(&mut src, 2.0).unwrap();
            let drive = drive_for_target(g.x, g.p, alpha_in).unwrap();
            let out = sagnac_output(alpha_in, &drive);
            let (x, p) = out.quadratures();
            let scale = (g.x * g.x + g.p * g.p).sqrt().max(1e-12);
            assert!(((x - g.x).powi(2) + (p - g.p).powi(2)).sqrt() / scale < 1e-9);
        }
    }

    #[test]
    fn drive_dark_point_and_reachability() {
        let alpha_in = CoherentAmplitude::from_photons(2.0, 0.0);
        let d = drive_for_target(0.0, 0.0, alpha_in).unwrap();
        assert_eq!(d.phi_cw, 0.0);
        assert_eq!(d.phi_ccw, 0.0);
        // 2.0 photons -> |alpha_in| = 1, reachable |target|/2 <= 1
        assert!(drive_for_target(2.1, 0.0, alpha_in).is_err());
        assert!(drive_for_target(1.9, 0.0, alpha_in).is_ok());
    }

    #[test]
    fn packet_layout() {
        let mut src = EntropySource::seeded(9);
        let payload: Vec<_> = (0..PAYLOAD_SYMBOLS)
            .map(|_| gaussian_pair(&mut src, 1.0).unwrap())
            .collect();
        let scale = EncodingScale::new(5.0).unwrap();
        let spec = TxPulseSpec::default();
        let pkt = build_packet(&payload, 0xDEAD_BEEF_0BAD_F00D, SYNC_PATTERN, &scale, &spec).unwrap();
        assert_eq!(pkt.symbols.len(), 1 + 64 + 64 + 8192 + 64);
        assert_eq!(pkt.symbols[0].role, SymbolRole::Marker);
        // header bit 0 -> +x at 100 photons, bit 1 -> -x
        let first_bit = SYNC_PATTERN >> 63 == 1;
        let hdr = &pkt.symbols[1];
        assert_eq!(hdr.x_a < 0.0, first_bit);
        assert!((hdr.x_a.abs() - (2.0 * 100.0f64).sqrt()).abs() < 1e-12);
        assert_eq!(hdr.p_a, 0.0);
        // determinism
        let pkt2 = build_packet(&payload, 0xDEAD_BEEF_0BAD_F00D, SYNC_PATTERN, &scale, &spec).unwrap();
        assert_eq!(pkt, pkt2);
        // wrong payload length
        assert!(build_packet(&payload[..100], 0, SYNC_PATTERN, &scale, &spec).is_err());
    }

    #[test]
    fn carve_extinction_floor() {
        let spec = TxPulseSpec::default();
        let idle = idle_frame(&spec, 30.0);
        assert!((idle.floor.photons() - 1.0).abs() < 1e-9);
        assert!((idle.reference.photons() - 1000.0).abs() < 1e-9);
        assert_eq!(idle.signal, CoherentAmplitude::DARK);
        let dark = idle_frame(&spec, f64::INFINITY);
        assert_eq!(dark.floor.photons(), 0.0);
    }

    #[test]
    fn carve_realizes_targets() {
        let mut src = EntropySource::seeded(10);
        let payload: Vec<_> = (0..PAYLOAD_SYMBOLS)
            .map(|_| gaussian_pair(&mut src, 1.0).unwrap())
            .collect();
        let scale = EncodingScale::for_va(25.0, 1.0).unwrap();
        let spec = TxPulseSpec::default();
        let pkt = build_packet(&payload, 7, SYNC_PATTERN, &scale, &spec).unwrap();
        let frames = carve_pulses(&pkt, &spec, 30.0).unwrap();
        assert_eq!(frames.len(), PACKET_SYMBOLS);
        assert!((frames[0].reference.photons() - 4000.0).abs() < 1e-9);
        for (f, s) in frames.iter().zip(pkt.symbols.iter()).skip(1) {
            let (x, p) = f.signal.quadratures();
            assert!((x - s.x_a).abs() < 1e-9 * (1.0 + s.x_a.abs()));
            assert!((p - s.p_a).abs() < 1e-9 * (1.0 + s.p_a.abs()));
        }
    }
}
