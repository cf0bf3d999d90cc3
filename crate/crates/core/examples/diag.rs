// temporary diagnostic: jitter-free sweep isolates recovery-noise attenuation
use cvqkd_core::channel::ChannelParams;
use cvqkd_core::sim::{run_excess_noise_sweep, LinkConfig};

fn main() {
    let mut cfg = LinkConfig { calibration_frames: 2_000_000, ..LinkConfig::loopback() };
    cfg.channel = ChannelParams { phase_variance: 0.0, ..cfg.channel };
    let mut slopes = Vec::new();
    let mut v_true = Vec::new();
    for seed in 1u64..=8 {
        cfg.seed = seed * 101;
        let sweep = run_excess_noise_sweep(&cfg, &[5.0, 10.0, 15.0, 20.0, 25.0], 100).unwrap();
        let vt = -(1.0f64 - sweep.raw_slope).ln();
        let p = &sweep.points[4];
        println!(
            "seed {:4}: v_rec_true {:.5} | v_hat {:.5} | corrected slope {:+.5}",
            cfg.seed,
            vt,
            p.mean_recovery_noise.v_ref + p.mean_recovery_noise.v_delta,
            sweep.delta_phi_hat
        );
        slopes.push(sweep.delta_phi_hat);
        v_true.push(vt);
    }
    let m = |v: &Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
    let sd = |v: &Vec<f64>| {
        let mm = m(v);
        (v.iter().map(|x| (x - mm) * (x - mm)).sum::<f64>() / (v.len() as f64 - 1.0)).sqrt()
    };
    println!(
        "mean corrected slope {:+.5} +/- {:.5}  | mean v_rec_true {:.5}",
        m(&slopes),
        sd(&slopes) / (slopes.len() as f64).sqrt(),
        m(&v_true)
    );
}
