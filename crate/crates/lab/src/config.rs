//! Plain-text key-value configuration with dotted section names.
//!
//! One `key = value` pair per line, `#` starts a comment. Unknown keys are
//! startup errors so typos cannot silently fall back to defaults.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};

use cvqkd_core::channel::ChannelParams;
use cvqkd_core::sim::LinkConfig;

/// The runnable scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Loopback10p4km,
    P2p5p2km,
    DistanceSweep,
    Pol24h,
    ShotNoiseSweep,
    Table1,
}

impl Scenario {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "loopback_10p4km" => Scenario::Loopback10p4km,
            "p2p_5p2km" => Scenario::P2p5p2km,
            "distance_sweep" => Scenario::DistanceSweep,
            "pol_24h" => Scenario::Pol24h,
            "shot_noise_sweep" => Scenario::ShotNoiseSweep,
            "table1" => Scenario::Table1,
            other => bail!(
                "unknown scenario '{other}' (expected one of loopback_10p4km, p2p_5p2km, \
                 distance_sweep, pol_24h, shot_noise_sweep, table1)"
            ),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Loopback10p4km => "loopback_10p4km",
            Scenario::P2p5p2km => "p2p_5p2km",
            Scenario::DistanceSweep => "distance_sweep",
            Scenario::Pol24h => "pol_24h",
            Scenario::ShotNoiseSweep => "shot_noise_sweep",
            Scenario::Table1 => "table1",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Key-rate parameters that live outside the link model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecurityOpts {
    pub beta: f64,
    pub z_conf: f64,
    pub eps_bar: f64,
    pub eps_pe: f64,
    pub symbol_rate: f64,
    /// Detector noise term of the finite-size expected noise; defaults to
    /// the link's electrical noise.
    pub xi_d: Option<f64>,
}

impl Default for SecurityOpts {
    fn default() -> Self {
        SecurityOpts {
            beta: 0.95,
            z_conf: 6.5,
            eps_bar: 1e-10,
            eps_pe: 1e-10,
            symbol_rate: 5e4,
            xi_d: None,
        }
    }
}

/// Everything one `run` invocation needs.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub link: LinkConfig,
    pub security: SecurityOpts,
    pub packets: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub jobs: usize,
    /// Canonical key-value view for hashing and echoing into artifacts.
    pub echo: BTreeMap<String, String>,
}

impl ScenarioConfig {
    pub fn new(scenario: Scenario) -> Self {
        let link = match scenario {
            Scenario::P2p5p2km => LinkConfig::p2p(),
            _ => LinkConfig::loopback(),
        };
        let mut cfg = ScenarioConfig {
            scenario,
            link,
            security: SecurityOpts::default(),
            packets: 100,
            seed: 1,
            out_dir: PathBuf::from("out"),
            jobs: 1,
            echo: BTreeMap::new(),
        };
        cfg.link.seed = cfg.seed;
        cfg.refresh_echo();
        cfg
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.link.seed = seed;
        self.refresh_echo();
    }

    /// FNV-1a over the sorted canonical key-value pairs.
    pub fn hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for (k, v) in &self.echo {
            for b in k.bytes().chain([b'='].into_iter()).chain(v.bytes()) {
                h ^= b as u64;
                h = h.wrapping_mul(0x100_0000_01b3);
            }
            h ^= b'\n' as u64;
            h = h.wrapping_mul(0x100_0000_01b3);
        }
        h
    }

    fn refresh_echo(&mut self) {
        let mut m = BTreeMap::new();
        let f = |x: f64| format!("{x}");
        m.insert("run.scenario".into(), self.scenario.name().into());
        m.insert("run.seed".into(), format!("{}", self.seed));
        m.insert("run.packets".into(), format!("{}", self.packets));
        let l = &self.link;
        m.insert("link.v_a".into(), f(l.v_a));
        m.insert("link.distance_km".into(), f(l.channel.distance_km));
        m.insert("link.atten_db_per_km".into(), f(l.channel.atten_db_per_km));
        m.insert("link.fixed_loss_db".into(), f(l.channel.fixed_loss_db));
        m.insert("link.delta_phi".into(), f(l.channel.phase_variance));
        m.insert("link.carrier_walk".into(), f(l.channel.carrier_walk));
        m.insert("link.delta_drift_rate".into(), f(l.channel.delta_drift_rate));
        m.insert("link.pol_drift_rate".into(), f(l.channel.pol_drift_rate));
        m.insert("link.pol_walk".into(), f(l.channel.pol_walk));
        m.insert("link.clock_offset_ppm".into(), f(l.channel.clock_offset_ppm));
        m.insert("link.eta_det".into(), f(l.detector.eta_det));
        m.insert("link.t_bob".into(), f(l.detector.t_bob));
        m.insert("link.nu_e".into(), f(l.detector.nu_e));
        m.insert("link.reference_photons".into(), f(l.pulses.reference_photons));
        m.insert("link.header_photons".into(), f(l.pulses.header_photons));
        m.insert("link.marker_factor".into(), f(l.pulses.marker_factor));
        m.insert("link.pulse_width_ns".into(), f(l.pulses.pulse_width_ns));
        m.insert("link.extinction_db".into(), f(l.extinction_db));
        m.insert("link.lo_power".into(), f(l.lo.lo_power));
        m.insert("link.counts_per_snu".into(), f(l.counts_per_snu));
        m.insert("bias.alpha0".into(), f(l.bias.alpha0));
        m.insert("bias.beta0".into(), f(l.bias.beta0));
        m.insert("bias.alpha_per_lo".into(), f(l.bias.alpha_per_lo));
        m.insert("bias.beta_per_lo".into(), f(l.bias.beta_per_lo));
        m.insert("bias.ramp_per_s".into(), f(l.bias.ramp_per_s));
        m.insert("bias.wander_amp".into(), f(l.bias.wander_amp));
        m.insert("bias.wander_period_s".into(), f(l.bias.wander_period_s));
        m.insert("sync.z_threshold_frac".into(), f(l.sync.z_threshold_frac));
        m.insert("sync.miss_budget".into(), format!("{}", l.sync.miss_budget));
        m.insert("sync.avg_window".into(), format!("{}", l.sync.avg_window));
        m.insert("sync.detect_factor".into(), f(l.sync.detect_factor));
        m.insert("sync.pol_step_v".into(), f(l.sync.pol_step_v));
        m.insert("sync.pol_gain".into(), f(l.sync.pol_gain_rad_per_v));
        m.insert("sync.timing_noise_ns".into(), f(l.sync.timing_noise_ns));
        m.insert("sim.idle_frames".into(), format!("{}", l.idle_frames));
        m.insert("sim.calibration_frames".into(), format!("{}", l.calibration_frames));
        m.insert("sim.initial_misalign_ns".into(), f(l.initial_misalign_ns));
        m.insert("sim.delta_threshold".into(), f(l.delta_threshold));
        let s = &self.security;
        m.insert("security.beta".into(), f(s.beta));
        m.insert("security.z_conf".into(), f(s.z_conf));
        m.insert("security.eps_bar".into(), f(s.eps_bar));
        m.insert("security.eps_pe".into(), f(s.eps_pe));
        m.insert("security.symbol_rate".into(), f(s.symbol_rate));
        if let Some(x) = s.xi_d {
            m.insert("security.xi_d".into(), f(x));
        }
        self.echo = m;
    }
}

fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected 'key = value', got '{raw}'", lineno + 1))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Apply a parsed configuration file on top of the scenario defaults.
/// Unknown keys are collected and reported together.
pub fn apply_file(cfg: &mut ScenarioConfig, text: &str) -> Result<()> {
    let pairs = parse_pairs(text)?;
    let mut unknown = Vec::new();
    for (k, v) in &pairs {
        if !apply_key(cfg, k, v).with_context(|| format!("key '{k}'"))? {
            unknown.push(k.clone());
        }
    }
    if !unknown.is_empty() {
        bail!("unknown configuration keys: {}", unknown.join(", "));
    }
    cfg.refresh_echo();
    Ok(())
}

fn apply_key(cfg: &mut ScenarioConfig, key: &str, value: &str) -> Result<bool> {
    let fv = || -> Result<f64> {
        value.parse::<f64>().map_err(|e| anyhow!("bad float '{value}': {e}"))
    };
    let uv = || -> Result<u64> {
        value.parse::<u64>().map_err(|e| anyhow!("bad integer '{value}': {e}"))
    };
    let l = &mut cfg.link;
    match key {
        "run.scenario" => cfg.scenario = Scenario::parse(value)?,
        "run.seed" => {
            let s = uv()?;
            cfg.seed = s;
            cfg.link.seed = s;
        }
        "run.packets" => cfg.packets = uv()? as usize,
        "link.v_a" => l.v_a = fv()?,
        "link.distance_km" => l.channel.distance_km = fv()?,
        "link.atten_db_per_km" => l.channel.atten_db_per_km = fv()?,
        "link.fixed_loss_db" => l.channel.fixed_loss_db = fv()?,
        "link.delta_phi" => l.channel.phase_variance = fv()?,
        "link.carrier_walk" => l.channel.carrier_walk = fv()?,
        "link.delta_drift_rate" => l.channel.delta_drift_rate = fv()?,
        "link.pol_drift_rate" => l.channel.pol_drift_rate = fv()?,
        "link.pol_walk" => l.channel.pol_walk = fv()?,
        "link.clock_offset_ppm" => l.channel.clock_offset_ppm = fv()?,
        "link.eta_det" => l.detector.eta_det = fv()?,
        "link.t_bob" => l.detector.t_bob = fv()?,
        "link.nu_e" => l.detector.nu_e = fv()?,
        "link.reference_photons" => l.pulses.reference_photons = fv()?,
        "link.header_photons" => l.pulses.header_photons = fv()?,
        "link.marker_factor" => l.pulses.marker_factor = fv()?,
        "link.pulse_width_ns" => l.pulses.pulse_width_ns = fv()?,
        "link.extinction_db" => l.extinction_db = fv()?,
        "link.lo_power" => {
            l.lo.lo_power = fv()?;
            l.lo.nominal_lo_power = l.lo.lo_power;
        }
        "link.counts_per_snu" => l.counts_per_snu = fv()?,
        "bias.alpha0" => l.bias.alpha0 = fv()?,
        "bias.beta0" => l.bias.beta0 = fv()?,
        "bias.alpha_per_lo" => l.bias.alpha_per_lo = fv()?,
        "bias.beta_per_lo" => l.bias.beta_per_lo = fv()?,
        "bias.ramp_per_s" => l.bias.ramp_per_s = fv()?,
        "bias.wander_amp" => l.bias.wander_amp = fv()?,
        "bias.wander_period_s" => l.bias.wander_period_s = fv()?,
        "sync.z_threshold_frac" => l.sync.z_threshold_frac = fv()?,
        "sync.miss_budget" => l.sync.miss_budget = uv()? as u32,
        "sync.avg_window" => l.sync.avg_window = uv()? as usize,
        "sync.detect_factor" => l.sync.detect_factor = fv()?,
        "sync.pol_step_v" => l.sync.pol_step_v = fv()?,
        "sync.pol_gain" => l.sync.pol_gain_rad_per_v = fv()?,
        "sync.timing_noise_ns" => l.sync.timing_noise_ns = fv()?,
        "sim.idle_frames" => l.idle_frames = uv()? as usize,
        "sim.calibration_frames" => l.calibration_frames = uv()? as usize,
        "sim.initial_misalign_ns" => l.initial_misalign_ns = fv()?,
        "sim.delta_threshold" => l.delta_threshold = fv()?,
        "security.beta" => cfg.security.beta = fv()?,
        "security.z_conf" => cfg.security.z_conf = fv()?,
        "security.eps_bar" => cfg.security.eps_bar = fv()?,
        "security.eps_pe" => cfg.security.eps_pe = fv()?,
        "security.symbol_rate" => cfg.security.symbol_rate = fv()?,
        "security.xi_d" => cfg.security.xi_d = Some(fv()?),
        _ => return Ok(false),
    }
    Ok(true)
}

/// Convenience: derived channel parameters for sweeps at a given distance
/// (fiber attenuation only, no splice/fixed losses).
pub fn sweep_channel(distance_km: f64, delta_phi: f64) -> ChannelParams {
    ChannelParams {
        distance_km,
        atten_db_per_km: 0.2,
        fixed_loss_db: 0.0,
        phase_variance: delta_phi,
        ..ChannelParams::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let mut cfg = ScenarioConfig::new(Scenario::Loopback10p4km);
        assert!((cfg.link.channel.total_loss_db() - 8.0).abs() < 1e-9);
        apply_file(&mut cfg, "link.v_a = 10\n# comment\nrun.seed = 99\n").unwrap();
        assert_eq!(cfg.link.v_a, 10.0);
        assert_eq!(cfg.seed, 99);
        assert_eq!(cfg.link.seed, 99);
    }

    #[test]
    fn unknown_keys_are_listed() {
        let mut cfg = ScenarioConfig::new(Scenario::Table1);
        let err = apply_file(&mut cfg, "link.v_a = 1\nlink.bogus = 2\nrun.what = 3\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("link.bogus"), "{err}");
        assert!(err.contains("run.what"), "{err}");
    }

    #[test]
    fn hash_tracks_content() {
        let a = ScenarioConfig::new(Scenario::Table1);
        let mut b = ScenarioConfig::new(Scenario::Table1);
        assert_eq!(a.hash(), b.hash());
        apply_file(&mut b, "link.v_a = 7.5\n").unwrap();
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn p2p_defaults() {
        let cfg = ScenarioConfig::new(Scenario::P2p5p2km);
        assert!((cfg.link.channel.total_loss_db() - 3.2).abs() < 1e-9);
        assert!((cfg.link.channel.phase_variance - 0.030).abs() < 1e-12);
    }
}
