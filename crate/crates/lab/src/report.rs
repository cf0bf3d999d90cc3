//! Artifact writers: CSV and JSON files, each stamped with the config hash
//! and seed of the run that produced them.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::{json, Value};

use cvqkd_core::rx::{bias_correct, PulseFrame};
use cvqkd_core::security::KeyRateResult;
use cvqkd_core::sync::EventRecord;
use cvqkd_core::tx::{Packet, SymbolRole};
use cvqkd_core::units::z_value;

/// One expectation checked by a scenario, for the summary and exit code.
#[derive(Debug, Clone)]
pub struct Expectation {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Expectation {
    pub fn check(name: &str, pass: bool, detail: String) -> Self {
        Expectation { name: name.to_string(), pass, detail }
    }
}

/// Collects artifact paths and expectations while a scenario runs.
pub struct RunReport {
    pub out_dir: PathBuf,
    pub config_hash: u64,
    pub seed: u64,
    pub artifacts: Vec<PathBuf>,
    pub expectations: Vec<Expectation>,
}

impl RunReport {
    pub fn new(out_dir: &Path, config_hash: u64, seed: u64) -> Result<Self> {
        fs::create_dir_all(out_dir)
            .with_context(|| format!("creating output directory {}", out_dir.display()))?;
        Ok(RunReport {
            out_dir: out_dir.to_path_buf(),
            config_hash,
            seed,
            artifacts: Vec::new(),
            expectations: Vec::new(),
        })
    }

    pub fn stamp(&self) -> String {
        format!("# config_hash=0x{:016x} seed={}\n", self.config_hash, self.seed)
    }

    pub fn write_csv(&mut self, name: &str, header: &str, rows: &[String]) -> Result<PathBuf> {
        let path = self.out_dir.join(name);
        let mut f = fs::File::create(&path)
            .with_context(|| format!("creating {}", path.display()))?;
        f.write_all(self.stamp().as_bytes())?;
        writeln!(f, "{header}")?;
        for r in rows {
            writeln!(f, "{r}")?;
        }
        self.artifacts.push(path.clone());
        Ok(path)
    }

    pub fn write_json(&mut self, name: &str, mut value: Value) -> Result<PathBuf> {
        let path = self.out_dir.join(name);
        if let Value::Object(ref mut map) = value {
            map.insert("config_hash".into(), json!(format!("0x{:016x}", self.config_hash)));
            map.insert("seed".into(), json!(self.seed));
        }
        let text = serde_json::to_string_pretty(&value)?;
        fs::write(&path, text + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        self.artifacts.push(path.clone());
        Ok(path)
    }

    pub fn expect(&mut self, name: &str, pass: bool, detail: String) {
        self.expectations.push(Expectation::check(name, pass, detail));
    }

    pub fn all_passed(&self) -> bool {
        self.expectations.iter().all(|e| e.pass)
    }

    /// Write the summary and return overall success.
    pub fn finish(&mut self, scenario: &str, echo: &Value) -> Result<bool> {
        let expectations: Vec<Value> = self
            .expectations
            .iter()
            .map(|e| json!({ "name": e.name, "pass": e.pass, "detail": e.detail }))
            .collect();
        let ok = self.all_passed();
        let artifacts: Vec<String> = self
            .artifacts
            .iter()
            .map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned())
            .collect();
        let summary = json!({
            "scenario": scenario,
            "pass": ok,
            "expectations": expectations,
            "artifacts": artifacts,
            "config": echo,
        });
        self.write_json("summary.json", summary)?;
        Ok(ok)
    }
}

fn role_name(role: SymbolRole) -> &'static str {
    match role {
        SymbolRole::Marker => "marker",
        SymbolRole::Header => "header",
        SymbolRole::Id => "id",
        SymbolRole::Payload => "payload",
        SymbolRole::Footer => "footer",
    }
}

/// Transmitter packet dump: one row per symbol slot.
pub fn packet_dump_rows(packet: &Packet) -> Vec<String> {
    packet
        .symbols
        .iter()
        .enumerate()
        .map(|(i, s)| {
            format!("{i},{},{:.9},{:.9},{:.9}", role_name(s.role), s.x_a, s.p_a, s.photons)
        })
        .collect()
}

/// Receiver frame capture: four rows per frame, clone-differenced values in
/// the corrected columns of the live bins.
pub fn frame_capture_rows(frames: &[PulseFrame]) -> Vec<String> {
    let mut rows = Vec::with_capacity(frames.len() * 4);
    for f in frames {
        let c = bias_correct(f).expect("raw frame");
        let line = |bin: &str, raw: &cvqkd_core::units::QuadSample, cx: f64, cp: f64, z: f64| {
            format!("{},{bin},{:.6},{:.6},{:.6},{:.6},{:.6}", f.index, raw.x, raw.p, cx, cp, z)
        };
        rows.push(line("signal", &f.signal, c.signal.x, c.signal.p, z_value(&c.signal)));
        rows.push(line(
            "reference",
            &f.reference,
            c.reference.x,
            c.reference.p,
            z_value(&c.reference),
        ));
        rows.push(line("clone_signal", &f.clone_signal, 0.0, 0.0, z_value(&f.clone_signal)));
        rows.push(line(
            "clone_reference",
            &f.clone_reference,
            0.0,
            0.0,
            z_value(&f.clone_reference),
        ));
    }
    rows
}

/// Control-plane event log rows.
pub fn event_rows(events: &[EventRecord]) -> Vec<String> {
    events
        .iter()
        .map(|e| format!("{:.0},{},{:.6}", e.t_ns, e.event.name(), e.detail))
        .collect()
}

/// Serialize a key-rate record.
pub fn key_rate_json(r: &KeyRateResult, symbol_rate: f64) -> Value {
    let mut v = json!({
        "i_ab_bits_per_symbol": r.i_ab,
        "chi_be": r.chi_be,
        "lambda": r.lambda.to_vec(),
        "r_asymptotic_bits_per_symbol": r.r_asymptotic,
        "r_asymptotic_bits_per_second": r.r_asymptotic * symbol_rate,
    });
    if let Some(fs) = &r.finite {
        v["finite_size"] = json!({
            "rate_bits_per_symbol": fs.rate,
            "rate_bits_per_second": fs.rate * symbol_rate,
            "t_min": fs.t_min,
            "sigma2_max": fs.sigma2_max,
            "chi_be_max": fs.chi_be_max,
            "delta_n": fs.delta_n,
            "pe_failure": fs.pe_failure,
        });
    }
    v
}
