use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use cvqkd_lab::accept;
use cvqkd_lab::config::{apply_file, Scenario, ScenarioConfig};
use cvqkd_lab::report::key_rate_json;
use cvqkd_lab::scenarios;

use cvqkd_core::security::{key_rate_report, FiniteSizeInput, SecurityInput};

/// Simulator and key-rate laboratory for a true-local-oscillator CV-QKD link.
#[derive(Parser)]
#[command(name = "cvqkd-lab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its artifacts.
    Run {
        /// One of: loopback_10p4km, p2p_5p2km, distance_sweep, pol_24h,
        /// shot_noise_sweep, table1.
        scenario: String,
        /// Key-value configuration file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Seed override (CVQKD_LAB_SEED takes precedence over everything).
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for artifacts.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Parallel workers for sweep points.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Compute secret key rates for one operating point.
    Keyrate {
        #[arg(long)]
        distance_km: f64,
        #[arg(long)]
        va: f64,
        /// Key symbols; enables the finite-size rate together with --finite-m.
        #[arg(long)]
        finite_n: Option<f64>,
        /// Parameter-estimation symbols.
        #[arg(long)]
        finite_m: Option<f64>,
        #[arg(long, default_value_t = 0.2)]
        atten_db_per_km: f64,
        #[arg(long, default_value_t = 0.42)]
        eta: f64,
        #[arg(long, default_value_t = 0.175)]
        nu_e: f64,
        #[arg(long, default_value_t = 0.95)]
        beta: f64,
        /// Phase-noise model slope; excess noise defaults to va * delta_phi.
        #[arg(long, default_value_t = 0.034)]
        delta_phi: f64,
        /// Explicit excess noise override in SNU.
        #[arg(long)]
        xi: Option<f64>,
        #[arg(long, default_value_t = 5e4)]
        symbol_rate: f64,
    },
    /// Run the acceptance suite; exit code reflects the overall outcome.
    Selftest,
}

fn env_seed() -> Option<u64> {
    std::env::var("CVQKD_LAB_SEED").ok().and_then(|s| s.parse().ok())
}

fn cmd_run(
    scenario: String,
    config: Option<PathBuf>,
    seed: Option<u64>,
    out: PathBuf,
    jobs: usize,
) -> Result<bool> {
    let mut cfg = ScenarioConfig::new(Scenario::parse(&scenario)?);
    if let Some(path) = config {
        let text = std::fs::read_to_string(&path)
            .with_context(|| format!("reading config {}", path.display()))?;
        apply_file(&mut cfg, &text)?;
    }
    if let Some(s) = seed {
        cfg.set_seed(s);
    }
    if let Some(s) = env_seed() {
        cfg.set_seed(s);
    }
    cfg.out_dir = out;
    cfg.jobs = jobs.max(1);
    let report = scenarios::run(&cfg)?;
    for e in &report.expectations {
        println!(
            "{} {} {}",
            if e.pass { "PASS" } else { "FAIL" },
            e.name,
            e.detail
        );
    }
    println!(
        "{}: {} artifacts in {}",
        cfg.scenario,
        report.artifacts.len(),
        report.out_dir.display()
    );
    Ok(report.all_passed())
}

#[allow(clippy::too_many_arguments)]
fn cmd_keyrate(
    distance_km: f64,
    va: f64,
    finite_n: Option<f64>,
    finite_m: Option<f64>,
    atten: f64,
    eta: f64,
    nu_e: f64,
    beta: f64,
    delta_phi: f64,
    xi: Option<f64>,
    symbol_rate: f64,
) -> Result<()> {
    let t = 10f64.powf(-atten * distance_km / 10.0);
    let inp = SecurityInput {
        v_a: va,
        t,
        xi: xi.unwrap_or(va * delta_phi),
        eta,
        nu_el: nu_e,
        beta_rec: beta,
    };
    let fs = match (finite_n, finite_m) {
        (Some(n), Some(m)) => Some(FiniteSizeInput {
            n_key: n,
            m_est: m,
            z_conf: 6.5,
            eps_bar: 1e-10,
            eps_pe: 1e-10,
            xi_d: nu_e,
            symbol_rate,
        }),
        (Some(n), None) => Some(FiniteSizeInput::half_split(2.0 * n, nu_e)),
        _ => None,
    };
    let report = key_rate_report(&inp, fs.as_ref()).map_err(|e| anyhow::anyhow!("{e}"))?;
    let mut v = key_rate_json(&report, symbol_rate);
    v["input"] = serde_json::json!({
        "distance_km": distance_km,
        "v_a": va,
        "t": t,
        "xi": inp.xi,
        "eta": eta,
        "nu_e": nu_e,
        "beta": beta,
    });
    println!("{}", serde_json::to_string_pretty(&v)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { scenario, config, seed, out, jobs } => {
            cmd_run(scenario, config, seed, out, jobs)
        }
        Command::Keyrate {
            distance_km,
            va,
            finite_n,
            finite_m,
            atten_db_per_km,
            eta,
            nu_e,
            beta,
            delta_phi,
            xi,
            symbol_rate,
        } => cmd_keyrate(
            distance_km,
            va,
            finite_n,
            finite_m,
            atten_db_per_km,
            eta,
            nu_e,
            beta,
            delta_phi,
            xi,
            symbol_rate,
        )
        .map(|_| true),
        Command::Selftest => {
            let results = accept::run_all();
            for r in &results {
                println!("{}", r.line());
            }
            let ok = results.iter().all(|r| r.pass);
            println!("selftest: {}", if ok { "all criteria passed" } else { "FAILURES present" });
            Ok(ok)
        }
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
