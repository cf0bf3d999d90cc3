//! Secret-key-rate computation for the heterodyne GMCS protocol with a
//! trusted receiver: Devetak-Winter asymptotic rate with the Holevo bound
//! from closed-form symplectic eigenvalues, worst-case finite-size bounds,
//! and modulation-variance optimization.
//!
//! Conventions: `v_a` is the modulation variance per quadrature in SNU,
//! `t` the channel transmission, `xi` the excess noise referred to the
//! channel input, `eta` the effective detection efficiency, and `nu_el`
//! the electrical noise in SNU. The heterodyne detection-noise figure is
//! `chi_het = (2 - eta + 2 nu_el) / eta` and enters the conditional-state
//! coefficients as its square.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::{Error, Result};

/// Inputs to the key-rate calculation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecurityInput {
    pub v_a: f64,
    pub t: f64,
    pub xi: f64,
    pub eta: f64,
    pub nu_el: f64,
    /// Reconciliation efficiency beta, in (0, 1].
    pub beta_rec: f64,
}

impl SecurityInput {
    pub fn validate(&self) -> Result<()> {
        let ok = self.v_a > 0.0
            && self.t > 0.0
            && self.t <= 1.0
            && self.xi >= 0.0
            && self.eta > 0.0
            && self.eta <= 1.0
            && self.nu_el >= 0.0
            && self.beta_rec > 0.0
            && self.beta_rec <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::NumericalDomain("security input outside physical range"))
        }
    }

    fn chi_line(&self) -> f64 {
        (1.0 + self.t * self.xi) / self.t - 1.0
    }

    fn chi_het(&self) -> f64 {
        (1.0 + (1.0 - self.eta) + 2.0 * self.nu_el) / self.eta
    }

    fn chi_tot(&self) -> f64 {
        self.chi_line() + self.chi_het() / self.t
    }
}

/// The Holevo bound together with its symplectic-eigenvalue breakdown.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolevoBreakdown {
    /// lambda_1 >= lambda_2 >= 1, lambda_3 >= lambda_4 >= 1, lambda_5 = 1.
    pub lambda: [f64; 5],
    pub a_coef: f64,
    pub b_coef: f64,
    pub c_coef: f64,
    pub d_coef: f64,
    pub chi_be: f64,
}

/// Finite-size analysis parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiniteSizeInput {
    /// Symbols kept for key.
    pub n_key: f64,
    /// Symbols spent on parameter estimation.
    pub m_est: f64,
    /// Confidence factor z for the worst-case bounds.
    pub z_conf: f64,
    /// Privacy-amplification smoothing parameter.
    pub eps_bar: f64,
    /// Parameter-estimation failure probability.
    pub eps_pe: f64,
    /// Trusted detector noise term entering the expected noise.
    pub xi_d: f64,
    /// Symbols per second, for rates in bits per second.
    pub symbol_rate: f64,
}

impl FiniteSizeInput {
    /// Default split: half of `n_total` for estimation, half for key.
    pub fn half_split(n_total: f64, xi_d: f64) -> Self {
        FiniteSizeInput {
            n_key: n_total / 2.0,
            m_est: n_total / 2.0,
            z_conf: 6.5,
            eps_bar: 1e-10,
            eps_pe: 1e-10,
            xi_d,
            symbol_rate: 5e4,
        }
    }

    pub fn n_total(&self) -> f64 {
        self.n_key + self.m_est
    }
}

/// Finite-size rate with its worst-case ingredients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiniteSizeRate {
    /// Bits per symbol; zero with `pe_failure` set when the worst-case
    /// transmission collapses.
    pub rate: f64,
    /// Worst-case effective transmission (eta T / 2 direction).
    pub t_min: f64,
    /// Worst-case Bob-referenced noise variance.
    pub sigma2_max: f64,
    /// Holevo bound at the worst-case parameters.
    pub chi_be_max: f64,
    /// Privacy-amplification penalty Delta(n).
    pub delta_n: f64,
    pub pe_failure: bool,
}

/// Full key-rate record for reports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyRateResult {
    pub i_ab: f64,
    pub chi_be: f64,
    pub lambda: [f64; 5],
    pub r_asymptotic: f64,
    pub finite: Option<FiniteSizeRate>,
}

/// g(x) = (x+1) log2(x+1) - x log2(x), with g(0) = 0.
pub fn g_func(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    (x + 1.0) * (x + 1.0).log2() - x * x.log2()
}

/// Mutual information per symbol for heterodyne detection,
/// `log2((V + chi_tot) / (1 + chi_tot))`.
pub fn mutual_information(inp: &SecurityInput) -> Result<f64> {
    inp.validate()?;
    let v = inp.v_a + 1.0;
    let chi_tot = inp.chi_tot();
    Ok(((v + chi_tot) / (1.0 + chi_tot)).log2())
}

fn eigenpair(sum: f64, prod: f64, which: &'static str) -> Result<(f64, f64)> {
    // lambda^2 = (sum +/- sqrt(sum^2 - 4 prod)) / 2
    let disc = sum * sum - 4.0 * prod;
    let scale = (sum * sum).max(1.0);
    if disc < -1e-9 * scale {
        return Err(Error::NumericalDomain(which));
    }
    let root = disc.max(0.0).sqrt();
    let hi = ((sum + root) / 2.0).max(0.0).sqrt();
    let lo = ((sum - root) / 2.0).max(0.0).sqrt();
    Ok((hi, lo))
}

/// Holevo information chi_BE for collective attacks, via the closed-form
/// symplectic eigenvalues of the shared and conditional states.
pub fn holevo_bound(inp: &SecurityInput) -> Result<HolevoBreakdown> {
    inp.validate()?;
    let v = inp.v_a + 1.0;
    let t = inp.t;
    let chi_line = inp.chi_line();
    let chi_het = inp.chi_het();
    let chi_tot = inp.chi_tot();

    let a = v * v * (1.0 - 2.0 * t) + 2.0 * t + t * t * (v + chi_line) * (v + chi_line);
    let b = (t * (v * chi_line + 1.0)) * (t * (v * chi_line + 1.0));
    let (l1, l2) = eigenpair(a, b, "negative discriminant for lambda_1,2")?;

    let denom = t * (v + chi_tot);
    let c = (a * chi_het * chi_het
        + b
        + 1.0
        + 2.0 * chi_het * (v * b.sqrt() + t * (v + chi_line))
        + 2.0 * t * (v * v - 1.0))
        / (denom * denom);
    let d = ((v + b.sqrt() * chi_het) / denom) * ((v + b.sqrt() * chi_het) / denom);
    let (l3, l4) = eigenpair(c, d, "negative discriminant for lambda_3,4")?;

    let lambda = [l1, l2, l3, l4, 1.0];
    let chi_be = g_func((l1 - 1.0) / 2.0) + g_func((l2 - 1.0) / 2.0)
        - g_func((l3 - 1.0) / 2.0)
        - g_func((l4 - 1.0) / 2.0);

    Ok(HolevoBreakdown { lambda, a_coef: a, b_coef: b, c_coef: c, d_coef: d, chi_be })
}

/// Asymptotic Devetak-Winter rate `beta I_AB - chi_BE` in bits per symbol.
/// May be negative; key generation is then infeasible.
pub fn asymptotic_rate(inp: &SecurityInput) -> Result<f64> {
    let i_ab = mutual_information(inp)?;
    let h = holevo_bound(inp)?;
    Ok(inp.beta_rec * i_ab - h.chi_be)
}

/// Privacy-amplification penalty `Delta(n) = 7 sqrt(log2(2 / eps_bar) / n)`.
pub fn delta_n(n: f64, eps_bar: f64) -> f64 {
    7.0 * ((2.0 / eps_bar).log2() / n).sqrt()
}

/// Finite-size rate `(n/N) [beta I_AB - chi_BE^max(m) - Delta(n)]`.
///
/// Expected values feed the mutual information; the Holevo term is evaluated
/// at the worst-case effective transmission `t_min = (sqrt(T_hat) - z
/// sqrt(sigma^2 / (m V_A)))^2` and worst-case noise `sigma^2_max`, with
/// `T_hat = eta T / 2` and `sigma^2 = 1 + T_hat xi + xi_d` referenced to
/// Bob's input.
pub fn finite_size_rate(inp: &SecurityInput, fs: &FiniteSizeInput) -> Result<FiniteSizeRate> {
    inp.validate()?;
    if !(fs.n_key >= 1.0 && fs.m_est >= 1.0) {
        return Err(Error::NumericalDomain("finite-size split needs n, m >= 1"));
    }
    let t_hat = inp.eta * inp.t / 2.0;
    let sigma2 = 1.0 + t_hat * inp.xi + fs.xi_d;
    let dn = delta_n(fs.n_key, fs.eps_bar);

    let root = t_hat.sqrt() - fs.z_conf * (sigma2 / (fs.m_est * inp.v_a)).sqrt();
    let sigma2_max = sigma2 + fs.z_conf * sigma2 * 2.0f64.sqrt() / fs.m_est.sqrt();
    if root <= 0.0 {
        return Ok(FiniteSizeRate {
            rate: 0.0,
            t_min: 0.0,
            sigma2_max,
            chi_be_max: 0.0,
            delta_n: dn,
            pe_failure: true,
        });
    }
    let t_min = root * root;
    let xi_max = ((sigma2_max - 1.0 - fs.xi_d) / t_min).max(0.0);
    let worst = SecurityInput {
        t: (2.0 * t_min / inp.eta).min(1.0),
        xi: xi_max,
        ..*inp
    };
    let chi_be_max = holevo_bound(&worst)?.chi_be;
    let i_ab = mutual_information(inp)?;
    let frac = fs.n_key / fs.n_total();
    Ok(FiniteSizeRate {
        rate: frac * (inp.beta_rec * i_ab - chi_be_max - dn),
        t_min,
        sigma2_max,
        chi_be_max,
        delta_n: dn,
        pe_failure: false,
    })
}

/// Assemble the full key-rate record.
pub fn key_rate_report(inp: &SecurityInput, fs: Option<&FiniteSizeInput>) -> Result<KeyRateResult> {
    let i_ab = mutual_information(inp)?;
    let h = holevo_bound(inp)?;
    let finite = match fs {
        Some(f) => Some(finite_size_rate(inp, f)?),
        None => None,
    };
    Ok(KeyRateResult {
        i_ab,
        chi_be: h.chi_be,
        lambda: h.lambda,
        r_asymptotic: inp.beta_rec * i_ab - h.chi_be,
        finite,
    })
}

/// How the excess noise depends on the candidate modulation variance during
/// optimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum XiModel {
    /// Fixed excess noise, independent of `v_a`.
    Fixed(f64),
    /// Phase-noise model `xi = v_a * delta_phi`.
    PhaseNoise(f64),
}

impl XiModel {
    fn xi(&self, v_a: f64) -> f64 {
        match *self {
            XiModel::Fixed(xi) => xi,
            XiModel::PhaseNoise(dphi) => v_a * dphi,
        }
    }
}

/// Result of the modulation-variance search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VaOptimum {
    pub v_a: f64,
    pub rate: f64,
    /// False when even the best rate is negative.
    pub feasible: bool,
}

/// Maximize the (finite-size, when `fs` is given) rate over `v_a`: coarse
/// grid argmax followed by golden-section refinement between the best grid
/// neighbors.
pub fn optimize_va(
    grid: &[f64],
    template: &SecurityInput,
    xi_model: XiModel,
    fs: Option<&FiniteSizeInput>,
) -> Result<VaOptimum> {
    if grid.is_empty() {
        return Err(Error::NumericalDomain("empty v_a grid"));
    }
    let rate_at = |v_a: f64| -> Result<f64> {
        let inp = SecurityInput { v_a, xi: xi_model.xi(v_a), ..*template };
        match fs {
            Some(f) => Ok(finite_size_rate(&inp, f)?.rate),
            None => asymptotic_rate(&inp),
        }
    };
    let mut vals = Vec::with_capacity(grid.len());
    for &v in grid {
        vals.push(rate_at(v)?);
    }
    let mut best = 0;
    for i in 1..grid.len() {
        if vals[i] > vals[best] {
            best = i;
        }
    }
    let mut lo = grid[best.saturating_sub(1)];
    let mut hi = grid[(best + 1).min(grid.len() - 1)];
    if lo > hi {
        core::mem::swap(&mut lo, &mut hi);
    }
    // golden-section refinement
    let gr = (5.0f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - gr * (b - a);
    let mut d = a + gr * (b - a);
    let (mut fc, mut fd) = (rate_at(c)?, rate_at(d)?);
    for _ in 0..70 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = rate_at(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = rate_at(d)?;
        }
    }
    let mut v_opt = (a + b) / 2.0;
    let mut r_opt = rate_at(v_opt)?;
    if vals[best] > r_opt {
        v_opt = grid[best];
        r_opt = vals[best];
    }
    Ok(VaOptimum { v_a: v_opt, rate: r_opt, feasible: r_opt > 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_point() -> SecurityInput {
        SecurityInput {
            v_a: 1.0,
            t: 10f64.powf(-0.2),
            xi: 0.034,
            eta: 0.42,
            nu_el: 0.175,
            beta_rec: 0.95,
        }
    }

    #[test]
    fn g_at_zero_and_monotone() {
        assert_eq!(g_func(0.0), 0.0);
        let mut prev = 0.0;
        for k in 1..50 {
            let x = k as f64 * 0.2;
            let v = g_func(x);
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn mutual_information_lossless_point() {
        let inp = SecurityInput {
            v_a: 3.0,
            t: 1.0,
            xi: 0.0,
            eta: 1.0,
            nu_el: 0.0,
            beta_rec: 1.0,
        };
        // chi_het = 1, chi_line = 0, chi_tot = 1 -> log2(5/2)
        let i = mutual_information(&inp).unwrap();
        assert!((i - 2.5f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn mutual_information_frozen_value() {
        // Value frozen from an independent high-precision evaluation of the
        // three chi formulas.
        let i = mutual_information(&paper_point()).unwrap();
        assert!((i - 0.15359282554195858).abs() < 1e-12, "I_AB = {i}");
    }

    #[test]
    fn mutual_information_monotone_in_detector_noise() {
        let mut prev = f64::INFINITY;
        for nel in [0.0, 0.2, 0.5] {
            let inp = SecurityInput { nu_el: nel, ..paper_point() };
            let i = mutual_information(&inp).unwrap();
            assert!(i < prev);
            prev = i;
        }
    }

    #[test]
    fn holevo_frozen_values() {
        // Eigenvalues frozen from the numeric symplectic oracle.
        let h = holevo_bound(&paper_point()).unwrap();
        let expect = [
            1.374691582733964,
            1.0271014769264837,
            1.3374383797837914,
            1.0158442288204388,
            1.0,
        ];
        for (got, want) in h.lambda.iter().zip(expect.iter()) {
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
        assert!((h.chi_be - 0.0877916511784016).abs() < 1e-9);
        assert!(h.lambda[0] >= h.lambda[1] && h.lambda[1] >= 1.0 - 1e-12);
        assert!(h.lambda[2] >= h.lambda[3] && h.lambda[3] >= 1.0 - 1e-12);
    }

    #[test]
    fn holevo_vanishes_without_channel() {
        let inp = SecurityInput {
            v_a: 3.0,
            t: 1.0 - 1e-9,
            xi: 1e-12,
            eta: 1.0 - 1e-9,
            nu_el: 1e-12,
            beta_rec: 1.0,
        };
        let h = holevo_bound(&inp).unwrap();
        assert!(h.chi_be.abs() < 1e-6, "chi_be = {}", h.chi_be);
    }

    #[test]
    fn asymptotic_rate_signs() {
        let mut inp = paper_point();
        inp.beta_rec = 1e-9;
        let r = asymptotic_rate(&inp).unwrap();
        assert!(r <= 0.0);
        let r2 = asymptotic_rate(&paper_point()).unwrap();
        let h = holevo_bound(&paper_point()).unwrap();
        let i = mutual_information(&paper_point()).unwrap();
        assert!((r2 - (0.95 * i - h.chi_be)).abs() < 1e-15);
    }

    #[test]
    fn delta_n_frozen_value() {
        let d = delta_n(1e6, 1e-10);
        assert!((d - 0.040948074026684184).abs() < 1e-12, "delta = {d}");
    }

    #[test]
    fn finite_size_limits() {
        let inp = paper_point();
        // m -> infinity at fixed n: rate -> (n/N) (asymptotic - Delta(n)).
        let fs = FiniteSizeInput {
            n_key: 1e8,
            m_est: 1e18,
            z_conf: 6.5,
            eps_bar: 1e-10,
            eps_pe: 1e-10,
            xi_d: inp.nu_el,
            symbol_rate: 5e4,
        };
        let r = finite_size_rate(&inp, &fs).unwrap();
        let asym = asymptotic_rate(&inp).unwrap();
        let frac = fs.n_key / fs.n_total();
        let expect = frac * (asym - delta_n(fs.n_key, fs.eps_bar));
        assert!((r.rate - expect).abs() < 1e-9, "{} vs {}", r.rate, expect);
    }

    #[test]
    fn finite_size_pe_failure_flag() {
        let inp = paper_point();
        let fs = FiniteSizeInput::half_split(100.0, inp.nu_el);
        let r = finite_size_rate(&inp, &fs).unwrap();
        assert!(r.pe_failure);
        assert_eq!(r.rate, 0.0);
    }

    #[test]
    fn optimizer_single_point_grid() {
        let opt = optimize_va(&[2.0], &paper_point(), XiModel::Fixed(0.034), None).unwrap();
        assert_eq!(opt.v_a, 2.0);
    }

    #[test]
    fn optimizer_prefers_large_va_without_phase_noise() {
        // With xi free of v_a and ideal reconciliation the rate increases
        // with v_a; the grid evaluation doubles as the monotonicity oracle.
        let grid: Vec<f64> = (1..=40).map(|k| k as f64).collect();
        let template = SecurityInput { xi: 0.0, beta_rec: 1.0, ..paper_point() };
        let mut prev = f64::NEG_INFINITY;
        for &v in &grid {
            let r = asymptotic_rate(&SecurityInput { v_a: v, ..template }).unwrap();
            assert!(r > prev, "rate not increasing at v_a = {v}");
            prev = r;
        }
        let opt = optimize_va(&grid, &template, XiModel::PhaseNoise(0.0), None).unwrap();
        assert!(opt.v_a >= 39.0, "v_a_opt = {}", opt.v_a);
    }
}
