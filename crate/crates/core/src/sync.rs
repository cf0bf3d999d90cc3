//! Bob's control plane: the timing-lock state machine with its 1 ns slew
//! bound, bright-pulse packet detection, and the four-actuator polarization
//! hill-climb.
//!
//! Everything here consumes bias-corrected (control-path) observables; the
//! key path never depends on these decisions except through frame routing.

#[allow(unused_imports)]
use num_traits::Float;

use crate::cplx::PolUnitary;

/// Timing-lock status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LockStatus {
    Searching,
    Locked,
}

/// Lock-loop configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LockConfig {
    /// Control-path Z (photon-proportional part) above which a reference
    /// pulse counts as seen.
    pub z_threshold: f64,
    /// Missed references tolerated before falling back to searching.
    pub miss_budget: u32,
    pub period_ns: i64,
    /// Maximum clock adjustment per period (the hardware slew bound).
    pub slew_limit_ns: i64,
}

impl Default for LockConfig {
    fn default() -> Self {
        LockConfig { z_threshold: 0.0, miss_budget: 8, period_ns: 1000, slew_limit_ns: 1 }
    }
}

/// Timing-lock state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LockState {
    pub status: LockStatus,
    /// Bob's frame phase within the period, integer nanoseconds.
    pub bin_phase_ns: i64,
    pub misses: u32,
    /// Most recent applied adjustment, for slew audits.
    pub last_step_ns: i64,
}

impl LockState {
    pub fn new(initial_phase_ns: i64) -> Self {
        LockState {
            status: LockStatus::Searching,
            bin_phase_ns: initial_phase_ns,
            misses: 0,
            last_step_ns: 0,
        }
    }
}

/// What the control path sees of one period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameObservation {
    /// Photon-proportional part of the bias-corrected reference-bin Z.
    pub ref_z: f64,
    /// Estimated arrival offset of the reference within the bin, ns
    /// (sub-bin centroid from the sampled pulse shape; noisy).
    pub timing_offset_ns: f64,
}

/// Advance the lock by one period. Returns the applied clock adjustment,
/// always within the slew bound. While searching, the LO cadence continues
/// at the last phase.
pub fn lock_step(state: &mut LockState, cfg: &LockConfig, obs: &FrameObservation) -> i64 {
    let mut step = 0i64;
    if obs.ref_z >= cfg.z_threshold {
        state.status = LockStatus::Locked;
        state.misses = 0;
        // recenter toward the Z-maximizing sub-bin, one nanosecond at a time
        if obs.timing_offset_ns > 0.5 {
            step = cfg.slew_limit_ns;
        } else if obs.timing_offset_ns < -0.5 {
            step = -cfg.slew_limit_ns;
        }
        state.bin_phase_ns = (state.bin_phase_ns + step).rem_euclid(cfg.period_ns);
    } else if state.status == LockStatus::Locked {
        state.misses += 1;
        if state.misses > cfg.miss_budget {
            state.status = LockStatus::Searching;
            state.misses = 0;
        }
    }
    debug_assert!(step.abs() <= cfg.slew_limit_ns);
    state.last_step_ns = step;
    step
}

/// Bright-marker detector: fires when the photon-proportional reference Z
/// reaches `factor` times its rolling idle mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketDetector {
    pub rolling_z: f64,
    pub factor: f64,
    /// EMA weight of one new frame.
    pub ema_alpha: f64,
    primed: bool,
}

impl PacketDetector {
    pub fn new(factor: f64, window: usize) -> Self {
        PacketDetector {
            rolling_z: 0.0,
            factor,
            ema_alpha: 1.0 / window.max(1) as f64,
            primed: false,
        }
    }

    /// Feed an idle reference observation into the rolling mean.
    pub fn update_idle(&mut self, ref_z: f64) {
        if !self.primed {
            self.rolling_z = ref_z;
            self.primed = true;
        } else {
            self.rolling_z += self.ema_alpha * (ref_z - self.rolling_z);
        }
    }

    /// Does this frame look like a packet marker?
    pub fn check(&self, ref_z: f64) -> bool {
        self.primed && self.rolling_z > 0.0 && ref_z >= self.factor * self.rolling_z
    }
}

/// Polarization-controller configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolConfig {
    /// Voltage step per trial.
    pub step_v: f64,
    /// Radians of axis rotation per volt.
    pub gain_rad_per_v: f64,
    /// Frames averaged per probe.
    pub avg_window: usize,
    /// Reference pulses expected per probe window at 1 MHz operation.
    pub cycle_target: u32,
}

impl Default for PolConfig {
    fn default() -> Self {
        PolConfig { step_v: 0.05, gain_rad_per_v: 1.0, avg_window: 64, cycle_target: 64 }
    }
}

/// Four piezo actuators stepped in sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolController {
    pub actuators: [f64; 4],
    pub directions: [f64; 4],
    pub next_axis: usize,
    pub accepted: u64,
    pub rejected: u64,
}

impl PolController {
    pub fn new() -> Self {
        PolController {
            actuators: [0.0; 4],
            directions: [1.0; 4],
            next_axis: 0,
            accepted: 0,
            rejected: 0,
        }
    }
}

impl Default for PolController {
    fn default() -> Self {
        PolController::new()
    }
}

/// One probe of the link at a candidate actuator setting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolProbe {
    pub mean_z: f64,
    /// Reference pulses counted in the probe window.
    pub cycles: u32,
}

/// Outcome of one hill-climb trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolOutcome {
    Accepted,
    Rejected,
}

/// Correction unitary realized by the four fiber squeezers: alternating
/// 0-degree and 45-degree axes, rotation angle linear in voltage.
pub fn correction_unitary(actuators: &[f64; 4], gain_rad_per_v: f64) -> PolUnitary {
    let a = |i: usize| actuators[i] * gain_rad_per_v;
    PolUnitary::rot_x(a(3))
        .compose(&PolUnitary::rot_z(a(2)))
        .compose(&PolUnitary::rot_x(a(1)))
        .compose(&PolUnitary::rot_z(a(0)))
}

/// Perturb the next actuator and keep the trial setting only when the probe
/// shows a mean Z greater than or equal to the current one and a cycle count
/// no farther from the target.
pub fn pol_step(
    ctrl: &mut PolController,
    cfg: &PolConfig,
    mut probe: impl FnMut(&[f64; 4]) -> PolProbe,
) -> PolOutcome {
    let axis = ctrl.next_axis;
    ctrl.next_axis = (axis + 1) % 4;

    let base = probe(&ctrl.actuators);
    let mut trial_v = ctrl.actuators;
    trial_v[axis] += ctrl.directions[axis] * cfg.step_v;
    let trial = probe(&trial_v);

    let cycle_ok = trial.cycles.abs_diff(cfg.cycle_target) <= base.cycles.abs_diff(cfg.cycle_target);
    if trial.mean_z >= base.mean_z && cycle_ok {
        // acceptance predicate: never a strictly decreasing mean Z
        debug_assert!(trial.mean_z >= base.mean_z);
        ctrl.actuators = trial_v;
        ctrl.accepted += 1;
        PolOutcome::Accepted
    } else {
        ctrl.directions[axis] = -ctrl.directions[axis];
        ctrl.rejected += 1;
        PolOutcome::Rejected
    }
}

/// Control-plane events for the scenario log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ControlEvent {
    Lock,
    Unlock,
    PacketStart,
    PacketReject,
    PolStepAccept,
    PolStepReject,
}

impl ControlEvent {
    pub fn name(&self) -> &'static str {
        match self {
            ControlEvent::Lock => "lock",
            ControlEvent::Unlock => "unlock",
            ControlEvent::PacketStart => "packet_start",
            ControlEvent::PacketReject => "packet_reject",
            ControlEvent::PolStepAccept => "pol_step_accept",
            ControlEvent::PolStepReject => "pol_step_reject",
        }
    }
}

/// Timestamped control event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventRecord {
    pub t_ns: f64,
    pub event: ControlEvent,
    pub detail: f64,
}
