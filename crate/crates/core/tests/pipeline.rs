//! End-to-end pipeline checks on the simulated link: DSP exactness with all
//! noise off, photon-number bookkeeping against the receiver model, recovery
//! noise scaling, and the excess-noise estimation chain.

use cvqkd_core::channel::ChannelParams;
use cvqkd_core::recovery::{apply_delta, extract_phi};
use cvqkd_core::rng::{standard_pair, EntropySource};
use cvqkd_core::rx::SnuCalibration;
use cvqkd_core::sim::{
    run_excess_noise_sweep, run_lock_acquisition, LinkConfig, LinkSimulation,
};
use cvqkd_core::sync::LockStatus;
use cvqkd_core::tx::PAYLOAD_SYMBOLS;
use cvqkd_core::units::QuadSample;

fn quiet_channel() -> ChannelParams {
    ChannelParams {
        phase_variance: 0.0,
        carrier_walk: 0.0,
        delta_drift_rate: 0.0,
        pol_drift_rate: 0.0,
        pol_walk: 0.0,
        clock_offset_ppm: 0.0,
        ..ChannelParams::default()
    }
}

#[test]
fn noise_free_pipeline_is_exact() {
    let mut cfg = LinkConfig {
        noise_free: true,
        extinction_db: f64::INFINITY,
        v_a: 25.0,
        idle_frames: 4,
        ..LinkConfig::default()
    };
    cfg.detector.nu_e = 0.0;
    cfg.channel = ChannelParams {
        carrier_walk: 50.0, // the fast phase still runs; recovery must undo it
        ..quiet_channel()
    };
    cfg.bias = cvqkd_core::rx::BiasModel::none();

    let mut sim = LinkSimulation::new(cfg).unwrap();
    let g = cfg.counts_per_snu;
    sim.calibration = Some(SnuCalibration {
        shot_var_adc: g * g,
        elec_var_adc: 0.0,
        frames_used: 0,
    });
    for _ in 0..64 {
        sim.step_idle().unwrap();
    }
    let cap = sim.send_packet(0xA5).unwrap();
    assert!(cap.marker_found);
    let est = sim.process_packet(&cap).unwrap();
    assert_eq!(est.id_hat, 0xA5);

    let scale = (cfg.detector.eta() * cfg.channel.transmission() / 2.0).sqrt();
    let payload = &est.symbols[128..128 + PAYLOAD_SYMBOLS];
    for (sym, truth) in payload.iter().zip(cap.packet.symbols.iter().skip(129)) {
        let s = apply_delta(sym, est.delta.delta);
        let ex = scale * truth.x_a;
        let ep = scale * truth.p_a;
        let err = ((s.x - ex).powi(2) + (s.p - ep).powi(2)).sqrt();
        let mag = (ex * ex + ep * ep).sqrt().max(1e-6);
        assert!(err / mag < 1e-9, "symbol error {err} at magnitude {mag}");
    }
}

#[test]
fn reference_photon_number_round_trip() {
    // 1000-photon reference through a lossless channel reads back as 1000
    let mut cfg = LinkConfig {
        v_a: 1.0,
        calibration_frames: 150_000,
        ..LinkConfig::default()
    };
    cfg.channel = ChannelParams {
        distance_km: 0.0,
        fixed_loss_db: 0.0,
        ..quiet_channel()
    };
    let mut sim = LinkSimulation::new(cfg).unwrap();
    sim.calibrate().unwrap();
    let n = sim.mean_reference_photons(10_000).unwrap();
    assert!((n - 1000.0).abs() < 50.0, "mean photons {n}");
}

#[test]
fn reference_photon_number_tracks_loss() {
    // 8 dB of loss scales the photon estimate by 0.1585
    let cfg = LinkConfig {
        v_a: 1.0,
        calibration_frames: 150_000,
        channel: quiet_channel(),
        ..LinkConfig::default()
    };
    let mut sim = LinkSimulation::new(cfg).unwrap();
    sim.calibrate().unwrap();
    let n = sim.mean_reference_photons(10_000).unwrap();
    assert!((n - 158.5).abs() < 12.0, "mean photons {n}");
}

#[test]
fn phase_error_variance_scales_inverse_with_reference_photons() {
    // unit-level Monte Carlo of the reference phase extraction
    let eta: f64 = 0.42;
    let nu_e: f64 = 0.175;
    let mut src = EntropySource::seeded(77);
    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for &n_ref in &[250.0, 500.0, 1000.0, 2000.0] {
        let amp = (eta / 2.0 * 2.0 * n_ref).sqrt(); // detected amplitude at T = 1
        let mut acc = 0.0;
        let m = 40_000;
        for k in 0..m {
            let theta = k as f64 * 0.7123;
            let (nx, np) = standard_pair(&mut src).unwrap();
            let (ex, ep) = standard_pair(&mut src).unwrap();
            let s = (1.0 + nu_e).sqrt();
            // reference model: X = A cos th, P = -A sin th, plus noise
            let q = QuadSample::snu(
                amp * theta.cos() + (nx + ex * 0.0) * s,
                -amp * theta.sin() + (np + ep * 0.0) * s,
            );
            let phi = extract_phi(&q).unwrap();
            let err = cvqkd_core::cplx::wrap_angle(phi - theta);
            acc += err * err;
        }
        xs.push(1.0 / n_ref);
        ys.push(acc / m as f64);
    }
    let r2 = cvqkd_core::estimation::r_squared(&xs, &ys).unwrap();
    assert!(r2 >= 0.98, "R^2 = {r2}, points {ys:?}");
    // the 1000-photon point sits near (1 + nu_e) / (eta * n_ref)
    let expect = (1.0 + nu_e) / (eta * 1000.0);
    assert!((ys[2] / expect - 1.0).abs() < 0.1, "var {} expect {expect}", ys[2]);
}

#[test]
fn excess_noise_sweep_recovers_injected_phase_noise() {
    // reduced-size version of the headline sweep: 3 points x 30 packets
    let cfg = LinkConfig {
        calibration_frames: 400_000,
        ..LinkConfig::loopback()
    };
    let sweep = run_excess_noise_sweep(&cfg, &[5.0, 15.0, 25.0], 30).unwrap();
    let slope = sweep.delta_phi_hat;
    assert!(
        (slope - 0.034).abs() < 0.012,
        "slope {slope} (raw {})",
        sweep.raw_slope
    );
    // the raw slope carries the receiver recovery noise on top
    assert!(sweep.raw_slope > slope);
    // V_B closure at every point: measured payload variance against
    // (T eta / 2)(V_A + xi) + 1 + nu_e with the configured V_A
    let t = cfg.channel.transmission();
    let eta = cfg.detector.eta();
    for p in &sweep.points {
        let predicted = t * eta / 2.0 * (p.v_a + p.point.xi_mean) + 1.0 + cfg.detector.nu_e;
        let rel = (p.point.v_b_mean - predicted).abs() / predicted;
        assert!(rel < 0.03, "V_B closure off by {rel} at V_A {}", p.v_a);
        // after the receiver-noise deconvolution the regression estimate
        // retains exactly the channel-jitter attenuation exp(-dphi/2):
        // that decorrelation is the excess-noise signal itself
        let k_target = p.v_a.sqrt() * (-cfg.channel.phase_variance / 2.0).exp();
        assert!(
            (p.point.k_mean / k_target - 1.0).abs() < 0.01,
            "k_hat {} vs target {k_target}",
            p.point.k_mean
        );
    }
}

#[test]
fn k_regression_unbiased_without_channel_jitter() {
    // with the channel jitter off, the deconvolved k estimate must land on
    // the configured encoding scale itself
    let cfg = LinkConfig {
        calibration_frames: 400_000,
        channel: quiet_channel(),
        v_a: 25.0,
        ..LinkConfig::loopback()
    };
    let mut master = LinkSimulation::new(cfg).unwrap();
    let cal = master.calibrate().unwrap();
    let point = cvqkd_core::sim::run_va_point(&cfg, 1, cal, 30).unwrap();
    let k_true = 5.0;
    assert!(
        (point.point.k_mean / k_true - 1.0).abs() < 0.01,
        "k_hat {} vs {k_true}",
        point.point.k_mean
    );
    // and the raw regression slope (before deconvolution) sits at
    // k sqrt(eta T / 2) within 2 percent
    let t = cfg.channel.transmission();
    let eta = cfg.detector.eta();
    let raw_slope = point.k_raw_mean * (eta * t / 2.0).sqrt();
    let expect = k_true * (eta * t / 2.0).sqrt();
    assert!(
        (raw_slope / expect - 1.0).abs() < 0.02,
        "raw slope {raw_slope} vs {expect}"
    );
}

#[test]
fn lock_acquires_from_cold_start_under_clock_offset() {
    let mut cfg = LinkConfig {
        initial_misalign_ns: 500.0,
        v_a: 1.0,
        ..LinkConfig::default()
    };
    cfg.channel = ChannelParams {
        clock_offset_ppm: 20.0,
        ..quiet_channel()
    };
    let report = run_lock_acquisition(&cfg, 1_000_000).unwrap();
    assert!(report.acquired_at_frame.is_some(), "never locked");
    let at = report.acquired_at_frame.unwrap();
    assert!(at < 1_000_000, "locked at {at}");
    assert!(report.max_abs_step_ns <= 1, "slew violated: {}", report.max_abs_step_ns);
    assert!(report.final_misalign_ns.abs() < 3.0, "misalign {}", report.final_misalign_ns);
}

#[test]
fn no_marker_means_no_detection() {
    // idle stream at benign loss: the detector never fires
    let mut cfg = LinkConfig { v_a: 1.0, ..LinkConfig::default() };
    cfg.channel = ChannelParams {
        distance_km: 0.0,
        fixed_loss_db: 0.0,
        ..quiet_channel()
    };
    let mut sim = LinkSimulation::new(cfg).unwrap();
    let mut fired = 0u32;
    for _ in 0..1_000_000 {
        let st = sim.step_idle().unwrap();
        if sim.lock.status == LockStatus::Locked && sim.detector.check(st.ref_z_part) {
            fired += 1;
        }
    }
    assert_eq!(fired, 0, "false packet triggers: {fired}");
}

#[test]
fn polarization_correction_contrast_over_a_day() {
    // shortened 6-hour version with a proportionally faster drift: the
    // uncorrected run fades beyond 20 percent, the corrected one stays
    // within 15 percent of nominal
    let mut cfg = LinkConfig {
        v_a: 1.0,
        calibration_frames: 20_000,
        ..LinkConfig::default()
    };
    cfg.channel = ChannelParams {
        pol_drift_rate: 6.0e-5, // 4x the daily rate, over a quarter day
        pol_walk: 1e-4,
        clock_offset_ppm: 0.0,
        ..ChannelParams::default()
    };
    let hours = 6.0;
    let without =
        cvqkd_core::sim::run_polarization_day(&cfg, false, hours, 300.0, 0).unwrap();
    let with = cvqkd_core::sim::run_polarization_day(&cfg, true, hours, 300.0, 16).unwrap();
    let nominal = with[0].mean_ref_photons;
    let tail = |v: &[cvqkd_core::sim::PolSample]| {
        let q = &v[3 * v.len() / 4..];
        q.iter().map(|s| s.mean_ref_photons).sum::<f64>() / q.len() as f64
    };
    let faded = tail(&without);
    let held = tail(&with);
    assert!(
        faded < 0.80 * nominal,
        "uncorrected fade only {:.1}%",
        100.0 * (1.0 - faded / nominal)
    );
    assert!(
        (held - nominal).abs() < 0.15 * nominal,
        "corrected drifted {:.1}%",
        100.0 * (held / nominal - 1.0)
    );
}

#[test]
fn false_accept_bound_end_to_end() {
    // empirical trigger rate at loop-back noise, times the analytic chance
    // of both 64-symbol blocks passing the 0.5 correlation gate on noise
    let cfg = LinkConfig { v_a: 1.0, ..LinkConfig::loopback() };
    let mut sim = LinkSimulation::new(cfg).unwrap();
    let mut triggers = 0u64;
    let frames = 200_000u64;
    for _ in 0..frames {
        let st = sim.step_idle().unwrap();
        if sim.lock.status == LockStatus::Locked && sim.detector.check(st.ref_z_part) {
            triggers += 1;
        }
    }
    let p_trigger = triggers as f64 / frames as f64;
    // correlation of 64 noise symbols with a +/-1 pattern is ~N(0, 1/64):
    // P(corr >= 0.5) = Q(4) = 3.2e-5, squared for header AND footer
    let p_block = 3.2e-5f64;
    let per_frame = p_trigger * p_block * p_block;
    assert!(
        per_frame * 1e6 < 1e-3,
        "false-accept bound {} per 1e6 frames (trigger rate {p_trigger})",
        per_frame * 1e6
    );
}

#[test]
fn determinism_same_seed_same_results() {
    let cfg = LinkConfig { calibration_frames: 20_000, v_a: 10.0, ..LinkConfig::loopback() };
    let run = |c: &LinkConfig| {
        let mut sim = LinkSimulation::new(*c).unwrap();
        sim.calibrate().unwrap();
        let cap = sim.send_packet(3).unwrap();
        let est = sim.process_packet(&cap).unwrap();
        (est.k_hat, est.v_b, est.xi_hat, est.delta.delta)
    };
    let a = run(&cfg);
    let b = run(&cfg);
    assert_eq!(a, b);
    let c2 = LinkConfig { seed: cfg.seed + 1, ..cfg };
    let c = run(&c2);
    assert_ne!(a, c);
}
