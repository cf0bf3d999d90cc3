//! A full simulated link: Alice's transmitter, the fiber channel, Bob's
//! pulsed heterodyne receiver with its control loops, and the
//! post-processing pipeline, all driven from one seed.
//!
//! One period of simulated time produces one [`PulseFrame`] of four measured
//! bins. The control path (clone-differenced) feeds the timing lock, packet
//! detector, and polarization controller; the key path keeps raw samples and
//! is bias-corrected per packet in post-processing.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::channel::{advance, ChannelParams, ChannelState};
use crate::cplx::{Cx, Jones};
use crate::estimation::{
    excess_noise, fit_k, fit_phase_noise, EstimationResult, RecoveryNoise, VaPointEstimate,
};
use crate::recovery::{apply_delta, determine_delta, recover_symbol, DeltaEstimate, RecoveredSymbol};
use crate::rng::{gaussian_pair, standard_pair, EntropySource, GaussianPair};
use crate::rx::{
    bias_correct, calibration_from_accumulators, measure_bin, BiasModel, LoSchedule, PulseFrame,
    SnuCalibration, VarAccumulator,
};
use crate::sync::{
    correction_unitary, lock_step, pol_step, ControlEvent, EventRecord, FrameObservation,
    LockConfig, LockState, LockStatus, PacketDetector, PolConfig, PolController, PolOutcome,
    PolProbe,
};
use crate::tx::{
    build_packet, carve_pulses, idle_frame, CoherentAmplitude, EncodingScale, Packet, TxFrame,
    TxPulseSpec, SYNC_PATTERN,
};
use crate::units::{photon_number, z_value, DetectorConstants, QuadSample};
use crate::{Error, Result};

// entropy stream ids per subsystem
const STREAM_TX: u64 = 1;
const STREAM_CHANNEL: u64 = 2;
const STREAM_RX: u64 = 3;

/// Derive a per-task seed from the run seed.
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Control-plane tuning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncConfig {
    /// Lock threshold as a fraction of the nominal reference Z.
    pub z_threshold_frac: f64,
    pub miss_budget: u32,
    /// Frames per polarization probe and detector averaging window.
    pub avg_window: usize,
    /// Marker detection factor over the rolling reference mean.
    pub detect_factor: f64,
    pub pol_step_v: f64,
    pub pol_gain_rad_per_v: f64,
    /// RMS error of the sub-bin timing estimate, ns.
    pub timing_noise_ns: f64,
}

impl Default for SyncConfig {
    fn default() -> Self {
        SyncConfig {
            z_threshold_frac: 0.25,
            miss_budget: 8,
            avg_window: 64,
            detect_factor: 2.0,
            pol_step_v: 0.05,
            pol_gain_rad_per_v: 1.0,
            timing_noise_ns: 0.3,
        }
    }
}

/// Every physical and control parameter of one simulated link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkConfig {
    pub seed: u64,
    /// Target modulation variance per quadrature, SNU.
    pub v_a: f64,
    /// Standard deviation of the digital Gaussian encoding.
    pub digital_sigma: f64,
    pub channel: ChannelParams,
    pub detector: DetectorConstants,
    pub pulses: TxPulseSpec,
    pub extinction_db: f64,
    pub lo: LoSchedule,
    pub counts_per_snu: f64,
    pub bias: BiasModel,
    pub sync: SyncConfig,
    pub pattern: u64,
    /// Header/footer correlation threshold for packet acceptance.
    pub delta_threshold: f64,
    /// Idle periods inserted ahead of every packet.
    pub idle_frames: usize,
    /// Frames per calibration phase (used twice: LO off, then LO on).
    pub calibration_frames: usize,
    pub initial_misalign_ns: f64,
    pub initial_carrier: f64,
    pub initial_delta: f64,
    pub initial_pol: [f64; 3],
    /// Disable all stochastic measurement noise (DSP exactness audits only).
    pub noise_free: bool,
}

impl Default for LinkConfig {
    fn default() -> Self {
        LinkConfig {
            seed: 1,
            v_a: 25.0,
            digital_sigma: 1.0,
            channel: ChannelParams::default(),
            detector: DetectorConstants::default(),
            pulses: TxPulseSpec::default(),
            extinction_db: 30.0,
            lo: LoSchedule::default(),
            counts_per_snu: 64.0,
            bias: BiasModel::default(),
            sync: SyncConfig::default(),
            pattern: SYNC_PATTERN,
            delta_threshold: 0.5,
            idle_frames: 16,
            calibration_frames: 200_000,
            initial_misalign_ns: 0.0,
            initial_carrier: 0.3,
            initial_delta: 0.7,
            initial_pol: [0.0; 3],
            noise_free: false,
        }
    }
}

impl LinkConfig {
    /// The 10.4 km loop-back link: 8 dB of loss.
    pub fn loopback() -> Self {
        LinkConfig::default()
    }

    /// The 5.2 km point-to-point link: 3.2 dB of loss.
    pub fn p2p() -> Self {
        LinkConfig {
            channel: ChannelParams {
                distance_km: 5.2,
                fixed_loss_db: 3.2 - 5.2 * 0.2,
                phase_variance: 0.030,
                ..ChannelParams::default()
            },
            ..LinkConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.channel.validate()?;
        self.detector.validate()?;
        self.pulses.validate()?;
        if !(self.v_a > 0.0 && self.digital_sigma > 0.0 && self.counts_per_snu > 0.0) {
            return Err(Error::NumericalDomain("link config out of range"));
        }
        Ok(())
    }

    /// Expected detected reference amplitude squared in ADC Z units (the
    /// photon-proportional part of a reference-bin Z), from the link budget.
    fn nominal_ref_amp2_adc(&self) -> f64 {
        let g2 = self.counts_per_snu * self.counts_per_snu * self.lo.relative_power();
        g2 * self.detector.eta() * self.channel.transmission() * self.pulses.reference_photons
    }

    /// Expected per-quadrature noise variance of a raw bin in ADC counts^2.
    fn noise_var_adc(&self) -> f64 {
        let g2 = self.counts_per_snu * self.counts_per_snu;
        g2 * (self.lo.relative_power() + self.detector.nu_e)
    }
}

/// One observed period with its ground-truth context.
#[derive(Debug, Clone, Copy)]
pub struct FrameStep {
    pub frame: PulseFrame,
    pub misalign_ns: f64,
    pub overlap: f64,
    /// Control-path photon-proportional reference Z (ADC Z units).
    pub ref_z_part: f64,
}

/// The live link.
pub struct LinkSimulation {
    pub cfg: LinkConfig,
    tx_rng: EntropySource,
    ch_rng: EntropySource,
    rx_rng: EntropySource,
    pub state: ChannelState,
    pub lock: LockState,
    lock_cfg: LockConfig,
    pub detector: PacketDetector,
    pub pol: PolController,
    pol_cfg: PolConfig,
    pub frame_index: u64,
    pub calibration: Option<SnuCalibration>,
    pub events: Vec<EventRecord>,
    sigma_pulse2: f64,
}

impl LinkSimulation {
    pub fn new(cfg: LinkConfig) -> Result<Self> {
        cfg.validate()?;
        let lock_cfg = LockConfig {
            z_threshold: cfg.sync.z_threshold_frac * cfg.nominal_ref_amp2_adc(),
            miss_budget: cfg.sync.miss_budget,
            period_ns: cfg.lo.period_ns as i64,
            slew_limit_ns: cfg.lo.slew_limit_ns as i64,
        };
        let pol_cfg = PolConfig {
            step_v: cfg.sync.pol_step_v,
            gain_rad_per_v: cfg.sync.pol_gain_rad_per_v,
            avg_window: cfg.sync.avg_window,
            cycle_target: cfg.sync.avg_window as u32,
        };
        // Gaussian temporal envelope: FWHM^2 / (8 ln 2)
        let sigma_pulse2 =
            cfg.pulses.pulse_width_ns * cfg.pulses.pulse_width_ns / (8.0 * 2.0f64.ln());
        Ok(LinkSimulation {
            tx_rng: EntropySource::seeded_stream(cfg.seed, STREAM_TX),
            ch_rng: EntropySource::seeded_stream(cfg.seed, STREAM_CHANNEL),
            rx_rng: EntropySource::seeded_stream(cfg.seed, STREAM_RX),
            state: ChannelState::new(cfg.initial_carrier, cfg.initial_delta, cfg.initial_pol, 0.0),
            lock: LockState::new(0),
            lock_cfg,
            detector: PacketDetector::new(cfg.sync.detect_factor, cfg.sync.avg_window),
            pol: PolController::new(),
            pol_cfg,
            frame_index: 0,
            calibration: None,
            events: Vec::new(),
            sigma_pulse2,
            cfg,
        })
    }

    fn wrap_half_period(&self, x: f64) -> f64 {
        let p = self.cfg.lo.period_ns;
        x - p * (x / p).round()
    }

    /// Control-path noise floor of a clone-differenced Z, in ADC Z units.
    fn ctrl_floor_adc(&self) -> f64 {
        4.0 * self.cfg.noise_var_adc()
    }

    fn measure(
        &mut self,
        incoming: Cx,
        lo_rel: f64,
        t_s: f64,
    ) -> Result<QuadSample> {
        let amp = CoherentAmplitude::new(incoming.re, incoming.im);
        if self.cfg.noise_free {
            let (x_in, p_in) = amp.quadratures();
            let gain = (self.cfg.detector.eta() / 2.0).sqrt() * lo_rel.sqrt();
            let g = self.cfg.counts_per_snu;
            return Ok(QuadSample::adc(g * gain * x_in, g * gain * p_in));
        }
        measure_bin(
            amp,
            lo_rel,
            &self.cfg.detector,
            &self.cfg.bias,
            t_s,
            self.cfg.counts_per_snu,
            &mut self.rx_rng,
        )
    }

    /// Simulate one period: advance the channel, apply timing overlap and
    /// polarization, and measure the four bins.
    pub fn observe_frame(&mut self, tx: &TxFrame) -> Result<FrameStep> {
        let period_s = self.cfg.lo.period_ns * 1e-9;
        advance(&mut self.state, period_s, &self.cfg.channel, &mut self.ch_rng)?;
        self.frame_index += 1;
        let t_ns = self.frame_index as f64 * self.cfg.lo.period_ns;

        let misalign = self.wrap_half_period(
            self.state.clock_skew_ns + self.cfg.initial_misalign_ns - self.lock.bin_phase_ns as f64,
        );
        let overlap = (-misalign * misalign / (4.0 * self.sigma_pulse2)).exp();

        let t_amp = self.cfg.channel.transmission().sqrt();
        let u = correction_unitary(&self.pol.actuators, self.pol_cfg.gain_rad_per_v)
            .compose(&self.state.pol_unitary());

        let ph_sig = self.state.carrier_phase + self.state.delta + self.state.signal_jitter;
        let ph_ref = self.state.carrier_phase;
        let sig_pulse = tx.signal.as_cx().rotated(ph_sig).scale(t_amp * overlap);
        let ref_pulse = tx.reference.as_cx().rotated(ph_ref).scale(t_amp * overlap);
        let floor = tx.floor.as_cx().rotated(ph_ref).scale(t_amp);

        // the reference-path floor leaks into every bin except the reference
        // pulse's own window (there the pulse is the light)
        let j_signal = u.apply(&Jones::new(sig_pulse, floor));
        let j_reference = u.apply(&Jones::new(Cx::ZERO, ref_pulse));
        let j_clone = u.apply(&Jones::new(Cx::ZERO, floor));

        let lo_rel = self.cfg.lo.relative_power();
        let base_s = t_ns * 1e-9;
        let off = |b: f64| base_s + b * 1e-9;
        let lo = self.cfg.lo;
        let frame = PulseFrame {
            index: self.frame_index,
            t_ns,
            signal: self.measure(j_signal.s, lo_rel, off(lo.signal_offset_ns))?,
            reference: self.measure(j_reference.r, lo_rel, off(lo.reference_offset_ns))?,
            clone_signal: self.measure(
                j_clone.s,
                lo_rel,
                off(lo.signal_offset_ns + lo.clone_offset_ns),
            )?,
            clone_reference: self.measure(
                j_clone.r,
                lo_rel,
                off(lo.reference_offset_ns + lo.clone_offset_ns),
            )?,
            control_path: false,
        };

        let corrected = bias_correct(&frame)?;
        let ref_z_part = z_value(&corrected.reference) - self.ctrl_floor_adc();
        Ok(FrameStep { frame, misalign_ns: misalign, overlap, ref_z_part })
    }

    /// Run the timing lock on one observed frame.
    fn control_step(&mut self, step: &FrameStep) -> Result<i64> {
        let (t_noise, _) = if self.cfg.noise_free || self.cfg.sync.timing_noise_ns == 0.0 {
            (0.0, 0.0)
        } else {
            standard_pair(&mut self.rx_rng)?
        };
        let obs = FrameObservation {
            ref_z: step.ref_z_part,
            timing_offset_ns: step.misalign_ns + self.cfg.sync.timing_noise_ns * t_noise,
        };
        let was = self.lock.status;
        let adj = lock_step(&mut self.lock, &self.lock_cfg, &obs);
        if was != self.lock.status {
            let ev = if self.lock.status == LockStatus::Locked {
                ControlEvent::Lock
            } else {
                ControlEvent::Unlock
            };
            self.events.push(EventRecord {
                t_ns: step.frame.t_ns,
                event: ev,
                detail: self.lock.bin_phase_ns as f64,
            });
        }
        Ok(adj)
    }

    /// One idle period end to end (transmit, observe, lock, detector).
    pub fn step_idle(&mut self) -> Result<FrameStep> {
        let tx = idle_frame(&self.cfg.pulses, self.cfg.extinction_db);
        let step = self.observe_frame(&tx)?;
        self.control_step(&step)?;
        if self.lock.status == LockStatus::Locked {
            self.detector.update_idle(step.ref_z_part);
        }
        Ok(step)
    }

    /// Measure vacuum statistics and install the SNU calibration: electrical
    /// noise from LO-off frames (all four bins), shot noise from LO-on
    /// clone-signal bins.
    pub fn calibrate(&mut self) -> Result<SnuCalibration> {
        let frames = self.cfg.calibration_frames;
        let mut off_acc = VarAccumulator::default();
        let saved_power = self.cfg.lo.lo_power;
        self.cfg.lo.lo_power = 0.0;
        for _ in 0..frames {
            let tx = idle_frame(&self.cfg.pulses, self.cfg.extinction_db);
            let st = self.observe_frame(&tx)?;
            off_acc.push(st.frame.signal.x, st.frame.signal.p);
            off_acc.push(st.frame.reference.x, st.frame.reference.p);
            off_acc.push(st.frame.clone_signal.x, st.frame.clone_signal.p);
            off_acc.push(st.frame.clone_reference.x, st.frame.clone_reference.p);
        }
        self.cfg.lo.lo_power = saved_power;
        let mut on_acc = VarAccumulator::default();
        for _ in 0..frames {
            let st = self.step_idle()?;
            on_acc.push(st.frame.clone_signal.x, st.frame.clone_signal.p);
        }
        let cal = calibration_from_accumulators(&on_acc, &off_acc)?;
        self.calibration = Some(cal);
        Ok(cal)
    }

    /// Mean post-processing-path reference photon number over `frames` idle
    /// periods (requires calibration).
    pub fn mean_reference_photons(&mut self, frames: usize) -> Result<f64> {
        let cal = self.calibration.ok_or(Error::Calibration("calibrate first"))?;
        let mut bias_acc = VarAccumulator::default();
        let mut steps = Vec::with_capacity(frames);
        for _ in 0..frames {
            let st = self.step_idle()?;
            bias_acc.push(st.frame.clone_signal.x, st.frame.clone_signal.p);
            steps.push(st.frame.reference);
        }
        let (bx, bp) = bias_acc.mean();
        let mut z_acc = 0.0;
        for r in &steps {
            let snu = cal.to_snu(&QuadSample::adc(r.x - bx, r.p - bp));
            z_acc += z_value(&snu);
        }
        let z_mean = z_acc / frames as f64;
        photon_number(z_mean, cal.z_shot_snu(), cal.z_elec_snu(), self.cfg.detector.eta())
    }

    /// Stream one packet over the link. The returned capture holds the raw
    /// post-marker frames (when the marker was spotted) plus Alice's truth.
    pub fn send_packet(&mut self, id: u64) -> Result<PacketCapture> {
        let scale = EncodingScale::for_va(self.cfg.v_a, self.cfg.digital_sigma.powi(2))?;
        let mut digital = Vec::with_capacity(crate::tx::PAYLOAD_SYMBOLS);
        for _ in 0..crate::tx::PAYLOAD_SYMBOLS {
            digital.push(gaussian_pair(&mut self.tx_rng, self.cfg.digital_sigma)?);
        }
        let packet = build_packet(&digital, id, self.cfg.pattern, &scale, &self.cfg.pulses)?;
        let tx_frames = carve_pulses(&packet, &self.cfg.pulses, self.cfg.extinction_db)?;

        for _ in 0..self.cfg.idle_frames {
            self.step_idle()?;
        }

        let want = crate::tx::PACKET_SYMBOLS - 1;
        let mut frames: Vec<PulseFrame> = Vec::with_capacity(want);
        let mut capturing = false;
        let mut start_t_ns = 0.0;
        for tx in &tx_frames {
            let st = self.observe_frame(tx)?;
            self.control_step(&st)?;
            if capturing {
                if frames.len() < want {
                    frames.push(st.frame);
                }
            } else if self.lock.status == LockStatus::Locked && self.detector.check(st.ref_z_part) {
                capturing = true;
                start_t_ns = st.frame.t_ns;
                self.events.push(EventRecord {
                    t_ns: st.frame.t_ns,
                    event: ControlEvent::PacketStart,
                    detail: id as f64,
                });
            } else if self.lock.status == LockStatus::Locked {
                self.detector.update_idle(st.ref_z_part);
            }
        }
        Ok(PacketCapture {
            digital,
            packet,
            frames,
            marker_found: capturing,
            start_t_ns,
        })
    }

    /// Post-process one captured packet: SNU conversion, per-packet bias
    /// subtraction, per-symbol phase recovery, delta determination, and
    /// parameter estimation.
    pub fn process_packet(&self, cap: &PacketCapture) -> Result<PacketEstimate> {
        let cal = self.calibration.ok_or(Error::Calibration("calibrate first"))?;
        let want = crate::tx::PACKET_SYMBOLS - 1;
        if !cap.marker_found || cap.frames.len() < want {
            return Err(Error::Framing("packet marker not captured"));
        }
        let nu_e_hat = cal.nu_e_hat();
        let noise_var = 1.0 + nu_e_hat;

        // post-path bias estimate from the vacuum clone-signal bins
        let mut bias_acc = VarAccumulator::default();
        for f in &cap.frames {
            bias_acc.push(f.clone_signal.x, f.clone_signal.p);
        }
        let (bx, bp) = bias_acc.mean();

        let to_snu = |q: &QuadSample| cal.to_snu(&QuadSample::adc(q.x - bx, q.p - bp));

        let mut symbols: Vec<RecoveredSymbol> = Vec::with_capacity(want);
        let mut ref_z_sum = 0.0;
        for f in &cap.frames {
            let sig = to_snu(&f.signal);
            let reference = to_snu(&f.reference);
            let rec = recover_symbol(&sig, &reference)?;
            ref_z_sum += rec.quality;
            symbols.push(rec);
        }
        let p = 64usize;
        let header = &symbols[0..p];
        let id_block = &symbols[p..2 * p];
        let payload = &symbols[2 * p..2 * p + crate::tx::PAYLOAD_SYMBOLS];
        let footer = &symbols[2 * p + crate::tx::PAYLOAD_SYMBOLS..];

        let delta_est =
            determine_delta(header, footer, self.cfg.pattern, self.cfg.delta_threshold)?;

        // decode the packet id from the delta-corrected id block
        let mut id_hat = 0u64;
        for (i, sym) in id_block.iter().enumerate() {
            let s = apply_delta(sym, delta_est.delta);
            if s.x < 0.0 {
                id_hat |= 1 << (63 - i);
            }
        }

        // receiver-side recovery-noise budget from measured amplitudes; the
        // delta term uses the perpendicular residual power of the aligned
        // pattern symbols, which carries their own phase jitter
        let ref_amp2 = ref_z_sum / want as f64 - 2.0 * noise_var;
        let mut pat_amp2_sum = 0.0;
        let mut perp2 = 0.0;
        let mut pat_n = 0usize;
        for sym in header.iter().chain(footer.iter()) {
            pat_amp2_sum += sym.x * sym.x + sym.p * sym.p - 2.0 * noise_var;
            let aligned = apply_delta(sym, delta_est.delta);
            perp2 += aligned.p * aligned.p;
            pat_n += 1;
        }
        let perp_var = perp2 / (pat_n as f64 - 1.0);
        let rn = RecoveryNoise::from_measured(ref_amp2, perp_var, pat_amp2_sum, noise_var);

        // pooled regression over both quadratures of the payload
        let n = crate::tx::PAYLOAD_SYMBOLS;
        let mut dig = Vec::with_capacity(2 * n);
        let mut meas = Vec::with_capacity(2 * n);
        let mut sx = 0.0;
        let mut sx2 = 0.0;
        for (sym, g) in payload.iter().zip(cap.digital.iter()) {
            let s = apply_delta(sym, delta_est.delta);
            dig.push(g.x);
            meas.push(s.x);
            dig.push(g.p);
            meas.push(s.p);
            sx += s.x + s.p;
            sx2 += s.x * s.x + s.p * s.p;
        }
        let t = self.cfg.channel.transmission();
        let eta = self.cfg.detector.eta();
        let k_raw = fit_k(&dig, &meas, t, eta)?;
        let k_hat = k_raw / rn.attenuation();
        let v_a_hat = k_hat * k_hat * self.cfg.digital_sigma.powi(2);
        let v_a_raw = k_raw * k_raw * self.cfg.digital_sigma.powi(2);

        let m = 2.0 * n as f64;
        let v_b = (sx2 - sx * sx / m) / (m - 1.0);
        let xi_hat = excess_noise(v_b, v_a_hat, t, eta, nu_e_hat)?;
        let xi_raw = excess_noise(v_b, v_a_raw, t, eta, nu_e_hat)?;

        Ok(PacketEstimate {
            id: cap.packet.id,
            id_hat,
            delta: delta_est,
            k_raw,
            k_hat,
            v_a_hat,
            v_b,
            xi_hat,
            xi_raw,
            recovery_noise: rn,
            nu_e_hat,
            ref_amp2,
            symbols,
        })
    }
}

/// Raw capture of one packet attempt.
#[derive(Debug, Clone)]
pub struct PacketCapture {
    pub digital: Vec<GaussianPair>,
    pub packet: Packet,
    pub frames: Vec<PulseFrame>,
    pub marker_found: bool,
    pub start_t_ns: f64,
}

/// Per-packet post-processing output.
#[derive(Debug, Clone)]
pub struct PacketEstimate {
    pub id: u64,
    pub id_hat: u64,
    pub delta: DeltaEstimate,
    pub k_raw: f64,
    pub k_hat: f64,
    pub v_a_hat: f64,
    pub v_b: f64,
    pub xi_hat: f64,
    /// Excess noise without the recovery-noise deconvolution (diagnostic).
    pub xi_raw: f64,
    pub recovery_noise: RecoveryNoise,
    pub nu_e_hat: f64,
    pub ref_amp2: f64,
    pub symbols: Vec<RecoveredSymbol>,
}

/// Aggregate over the accepted packets of one modulation-variance point.
#[derive(Debug, Clone)]
pub struct VaRunSummary {
    pub v_a: f64,
    pub point: VaPointEstimate,
    pub xi_raw_mean: f64,
    pub k_raw_mean: f64,
    pub packets_sent: usize,
    pub packets_accepted: usize,
    pub mean_ref_amp2: f64,
    pub mean_recovery_noise: RecoveryNoise,
    pub estimation: EstimationResult,
}

/// Run one modulation-variance point on a fresh link that shares the master
/// calibration. Packets are sent until `packets` are accepted (bounded by
/// twice that many attempts).
pub fn run_va_point(
    base: &LinkConfig,
    seed_salt: u64,
    calibration: SnuCalibration,
    packets: usize,
) -> Result<VaRunSummary> {
    let cfg = LinkConfig { seed: derive_seed(base.seed, seed_salt), ..*base };
    let mut sim = LinkSimulation::new(cfg)?;
    sim.calibration = Some(calibration);
    // settle the lock and the detector baseline
    for _ in 0..256 {
        sim.step_idle()?;
    }
    let mut xi = Vec::with_capacity(packets);
    let mut xi_raw = Vec::with_capacity(packets);
    let mut ks = Vec::with_capacity(packets);
    let mut k_raws = Vec::with_capacity(packets);
    let mut vbs = Vec::with_capacity(packets);
    let mut vas = Vec::with_capacity(packets);
    let mut amp2 = 0.0;
    let mut v_ref = 0.0;
    let mut v_delta = 0.0;
    let mut sent = 0usize;
    let mut id = 0u64;
    while xi.len() < packets && sent < 2 * packets + 16 {
        sent += 1;
        id += 1;
        let cap = sim.send_packet(id)?;
        if !cap.marker_found {
            continue;
        }
        match sim.process_packet(&cap) {
            Ok(est) => {
                xi.push(est.xi_hat);
                xi_raw.push(est.xi_raw);
                ks.push(est.k_hat);
                k_raws.push(est.k_raw);
                vbs.push(est.v_b);
                vas.push(est.v_a_hat);
                amp2 += est.ref_amp2;
                v_ref += est.recovery_noise.v_ref;
                v_delta += est.recovery_noise.v_delta;
            }
            Err(Error::Recovery(_)) | Err(Error::Framing(_)) => {
                sim.events.push(EventRecord {
                    t_ns: cap.start_t_ns,
                    event: ControlEvent::PacketReject,
                    detail: id as f64,
                });
            }
            Err(e) => return Err(e),
        }
    }
    if xi.is_empty() {
        return Err(Error::Estimation("no packets accepted at this point"));
    }
    let n = xi.len() as f64;
    let point = VaPointEstimate::from_packets(cfg.v_a, &xi, &ks, &vbs, &vas);
    let nu_e_hat = calibration.nu_e_hat();
    let t = cfg.channel.transmission();
    let eta = cfg.detector.eta();
    let estimation = EstimationResult {
        k_hat: point.k_mean,
        v_a_hat: point.v_a_hat_mean,
        xi_hat: point.xi_mean,
        v_b: point.v_b_mean,
        residual_variance: point.v_b_mean
            - (t * eta / 2.0) * point.v_a_hat_mean
            - 1.0
            - nu_e_hat,
        delta_phi_hat: 0.0, // filled by the sweep-level fit
        sample_count: xi.len() * 2 * crate::tx::PAYLOAD_SYMBOLS,
        nonphysical_xi: point.xi_mean < -3.0 * point.xi_stderr,
    };
    Ok(VaRunSummary {
        v_a: cfg.v_a,
        point,
        xi_raw_mean: xi_raw.iter().sum::<f64>() / n,
        k_raw_mean: k_raws.iter().sum::<f64>() / n,
        packets_sent: sent,
        packets_accepted: xi.len(),
        mean_ref_amp2: amp2 / n,
        mean_recovery_noise: RecoveryNoise { v_ref: v_ref / n, v_delta: v_delta / n },
        estimation,
    })
}

/// A full excess-noise-versus-V_A sweep with the phase-noise model fit.
#[derive(Debug, Clone)]
pub struct ExcessNoiseSweep {
    pub points: Vec<VaRunSummary>,
    pub delta_phi_hat: f64,
    pub delta_phi_stderr: f64,
    /// Slope without the recovery-noise deconvolution (diagnostic).
    pub raw_slope: f64,
    pub calibration: SnuCalibration,
}

/// Calibrate once, then run every modulation-variance point against the
/// shared calibration and fit the phase-noise model through the origin.
pub fn run_excess_noise_sweep(
    base: &LinkConfig,
    va_grid: &[f64],
    packets_per_point: usize,
) -> Result<ExcessNoiseSweep> {
    let mut master = LinkSimulation::new(*base)?;
    let calibration = master.calibrate()?;
    let mut points = Vec::with_capacity(va_grid.len());
    for (i, &v_a) in va_grid.iter().enumerate() {
        let cfg = LinkConfig { v_a, ..*base };
        points.push(run_va_point(&cfg, i as u64 + 1, calibration, packets_per_point)?);
    }
    finish_sweep(points, calibration)
}

/// Assemble the sweep-level fits from independently computed points (used by
/// parallel drivers, which must pass the points in grid order).
pub fn finish_sweep(
    mut points: Vec<VaRunSummary>,
    calibration: SnuCalibration,
) -> Result<ExcessNoiseSweep> {
    let pts: Vec<(f64, f64)> = points.iter().map(|p| (p.v_a, p.point.xi_mean)).collect();
    let raw_pts: Vec<(f64, f64)> = points.iter().map(|p| (p.v_a, p.xi_raw_mean)).collect();
    let (slope, se) = fit_phase_noise(&pts)?;
    let (raw_slope, _) = fit_phase_noise(&raw_pts)?;
    for p in &mut points {
        p.estimation.delta_phi_hat = slope;
    }
    Ok(ExcessNoiseSweep {
        points,
        delta_phi_hat: slope,
        delta_phi_stderr: se,
        raw_slope,
        calibration,
    })
}

/// Timing-lock acquisition report.
#[derive(Debug, Clone, Copy)]
pub struct LockReport {
    pub acquired_at_frame: Option<u64>,
    pub max_abs_step_ns: i64,
    pub final_misalign_ns: f64,
}

/// Cold-start acquisition: run idle frames until the lock engages (or the
/// frame budget runs out) and audit the slew bound throughout.
pub fn run_lock_acquisition(cfg: &LinkConfig, max_frames: u64) -> Result<LockReport> {
    let mut sim = LinkSimulation::new(*cfg)?;
    let mut max_step = 0i64;
    let mut acquired = None;
    let mut final_mis = f64::NAN;
    for i in 0..max_frames {
        let st = sim.step_idle()?;
        max_step = max_step.max(sim.lock.last_step_ns.abs());
        final_mis = st.misalign_ns;
        // a noise blip can flip the state machine briefly; acquisition means
        // locked onto an actual pulse overlap
        let pulse_hit = st.misalign_ns.abs() <= cfg.pulses.pulse_width_ns;
        if acquired.is_none() && sim.lock.status == LockStatus::Locked && pulse_hit {
            acquired = Some(i + 1);
            // keep tracking a while to audit the slew bound under lock
            for _ in 0..20_000u64.min(max_frames) {
                let st2 = sim.step_idle()?;
                max_step = max_step.max(sim.lock.last_step_ns.abs());
                final_mis = st2.misalign_ns;
            }
            break;
        }
    }
    Ok(LockReport {
        acquired_at_frame: acquired,
        max_abs_step_ns: max_step,
        final_misalign_ns: final_mis,
    })
}

/// One sampled point of the day-long polarization run.
#[derive(Debug, Clone, Copy)]
pub struct PolSample {
    pub t_hours: f64,
    pub mean_ref_photons: f64,
}

/// Day-long polarization experiment: sample the mean reference photon number
/// every `sample_every_s`, with the hill-climb running between samples when
/// `correction_on` (and always paused during the measurement itself).
pub fn run_polarization_day(
    cfg: &LinkConfig,
    correction_on: bool,
    hours: f64,
    sample_every_s: f64,
    steps_per_interval: usize,
) -> Result<Vec<PolSample>> {
    let mut sim = LinkSimulation::new(*cfg)?;
    sim.calibrate()?;
    let samples = (hours * 3600.0 / sample_every_s).round() as usize;
    let window = sim.pol_cfg.avg_window;
    let mut out = Vec::with_capacity(samples + 1);
    let first = sim.mean_reference_photons(window)?;
    out.push(PolSample { t_hours: 0.0, mean_ref_photons: first });
    for k in 1..=samples {
        // drift between samples, in one coarse step
        let params = sim.cfg.channel;
        advance(&mut sim.state, sample_every_s, &params, &mut sim.ch_rng)?;
        if correction_on {
            for _ in 0..steps_per_interval {
                // lift the controller out so the probe can borrow the link
                let pol_cfg = sim.pol_cfg;
                let z_threshold = sim.lock_cfg.z_threshold;
                let mut ctrl = sim.pol;
                let outcome = pol_step(&mut ctrl, &pol_cfg, |v| {
                    let saved = sim.pol.actuators;
                    sim.pol.actuators = *v;
                    let mut z = 0.0;
                    let mut cycles = 0u32;
                    for _ in 0..window {
                        if let Ok(st) = sim.step_idle() {
                            z += st.ref_z_part;
                            if st.ref_z_part >= z_threshold {
                                cycles += 1;
                            }
                        }
                    }
                    sim.pol.actuators = saved;
                    PolProbe { mean_z: z / window as f64, cycles }
                });
                sim.pol = ctrl;
                let ev = if outcome == PolOutcome::Accepted {
                    ControlEvent::PolStepAccept
                } else {
                    ControlEvent::PolStepReject
                };
                let t_ns = sim.frame_index as f64 * sim.cfg.lo.period_ns;
                sim.events.push(EventRecord { t_ns, event: ev, detail: 0.0 });
            }
        }
        let photons = sim.mean_reference_photons(window)?;
        out.push(PolSample {
            t_hours: k as f64 * sample_every_s / 3600.0,
            mean_ref_photons: photons,
        })
    }
    Ok(out)
}

/// One point of the shot-noise-versus-LO-power sweep.
#[derive(Debug, Clone, Copy)]
pub struct ShotNoisePoint {
    pub lo_power: f64,
    pub shot_var_adc: f64,
}

/// Sweep the LO power and report the measured shot variance at each point
/// (electrical noise measured once with the LO off and subtracted).
pub fn run_shot_noise_sweep(
    cfg: &LinkConfig,
    lo_powers: &[f64],
    frames_per_point: usize,
) -> Result<Vec<ShotNoisePoint>> {
    let mut sim = LinkSimulation::new(*cfg)?;
    // electrical noise with the LO off
    let mut off = VarAccumulator::default();
    sim.cfg.lo.lo_power = 0.0;
    for _ in 0..frames_per_point {
        let tx = idle_frame(&sim.cfg.pulses, sim.cfg.extinction_db);
        let st = sim.observe_frame(&tx)?;
        off.push(st.frame.clone_signal.x, st.frame.clone_signal.p);
    }
    let elec = off.variance();
    let mut out = Vec::with_capacity(lo_powers.len());
    for &p in lo_powers {
        sim.cfg.lo.lo_power = p;
        let mut acc = VarAccumulator::default();
        for _ in 0..frames_per_point {
            let tx = idle_frame(&sim.cfg.pulses, sim.cfg.extinction_db);
            let st = sim.observe_frame(&tx)?;
            acc.push(st.frame.clone_signal.x, st.frame.clone_signal.p);
        }
        out.push(ShotNoisePoint { lo_power: p, shot_var_adc: acc.variance() - elec });
    }
    Ok(out)
}
