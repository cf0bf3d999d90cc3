//! Two-stage carrier recovery: per-pair phase extraction from the reference
//! bin, rotation of the paired signal sample into the receiver basis, and
//! packet-level determination of the signal-reference offset delta by
//! header/footer pattern matching.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::units::{z_value, QuadSample};
use crate::{Error, Result};

/// A signal sample after reference-phase rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveredSymbol {
    pub x: f64,
    pub p: f64,
    /// Phase applied to this symbol.
    pub phi_used: f64,
    /// Z of the reference that produced the phase (recovery quality metric).
    pub quality: f64,
}

/// Extract the relative carrier phase from a reference measurement:
/// the four-quadrant angle of `(X_R, -P_R)`.
pub fn extract_phi(reference: &QuadSample) -> Result<f64> {
    if reference.x == 0.0 && reference.p == 0.0 {
        return Err(Error::Recovery("dead reference: zero amplitude"));
    }
    Ok((-reference.p).atan2(reference.x))
}

/// Rotate a signal sample into the receiver basis:
/// `X' = X cos phi - P sin phi`, `P' = X sin phi + P cos phi`.
pub fn rotate_to_bob_basis(signal: &QuadSample, phi: f64) -> QuadSample {
    let (c, s) = (phi.cos(), phi.sin());
    QuadSample {
        x: signal.x * c - signal.p * s,
        p: signal.x * s + signal.p * c,
        units: signal.units,
    }
}

/// Recover one symbol from its signal and reference samples.
pub fn recover_symbol(signal: &QuadSample, reference: &QuadSample) -> Result<RecoveredSymbol> {
    let phi = extract_phi(reference)?;
    let rot = rotate_to_bob_basis(signal, phi);
    Ok(RecoveredSymbol { x: rot.x, p: rot.p, phi_used: phi, quality: z_value(reference) })
}

/// Joint delta estimate with its per-block diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaEstimate {
    /// Joint header+footer estimate; rotating every symbol by `-delta`
    /// aligns the pattern with the +/-X axis.
    pub delta: f64,
    pub header_delta: f64,
    pub footer_delta: f64,
    pub header_corr: f64,
    pub footer_corr: f64,
}

fn pattern_sign(pattern: u64, index: usize) -> f64 {
    // bit 0 encodes phase 0 (+X), bit 1 encodes phase pi (-X)
    if (pattern >> (63 - index)) & 1 == 1 {
        -1.0
    } else {
        1.0
    }
}

fn weighted_sums(symbols: &[RecoveredSymbol], pattern: u64) -> (f64, f64) {
    let mut sx = 0.0;
    let mut sp = 0.0;
    for (i, sym) in symbols.iter().enumerate() {
        let s = pattern_sign(pattern, i);
        sx += s * sym.x;
        sp += s * sym.p;
    }
    (sx, sp)
}

fn block_correlation(symbols: &[RecoveredSymbol], pattern: u64, delta: f64) -> f64 {
    let (c, s) = (delta.cos(), delta.sin());
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, sym) in symbols.iter().enumerate() {
        // x component after undoing the delta rotation
        let x = sym.x * c + sym.p * s;
        num += pattern_sign(pattern, i) * x;
        den += x * x;
    }
    if den <= 0.0 {
        return 0.0;
    }
    num / (symbols.len() as f64 * den).sqrt()
}

/// Estimate delta from phase-corrected header and footer symbols as the
/// angle of the pattern-weighted quadrature sums, and reject the packet when
/// either block's pattern correlation falls below `threshold`.
pub fn determine_delta(
    header: &[RecoveredSymbol],
    footer: &[RecoveredSymbol],
    pattern: u64,
    threshold: f64,
) -> Result<DeltaEstimate> {
    if header.len() != 64 || footer.len() != 64 {
        return Err(Error::Framing("header and footer must hold 64 symbols each"));
    }
    let (hx, hp) = weighted_sums(header, pattern);
    let (fx, fp) = weighted_sums(footer, pattern);
    let delta = (hp + fp).atan2(hx + fx);
    let est = DeltaEstimate {
        delta,
        header_delta: hp.atan2(hx),
        footer_delta: fp.atan2(fx),
        header_corr: block_correlation(header, pattern, delta),
        footer_corr: block_correlation(footer, pattern, delta),
    };
    if est.header_corr < threshold || est.footer_corr < threshold {
        return Err(Error::Recovery("pattern correlation below threshold"));
    }
    Ok(est)
}

/// Undo a delta rotation on a recovered symbol.
pub fn apply_delta(sym: &RecoveredSymbol, delta: f64) -> RecoveredSymbol {
    let (c, s) = ((-delta).cos(), (-delta).sin());
    RecoveredSymbol {
        x: sym.x * c - sym.p * s,
        p: sym.x * s + sym.p * c,
        ..*sym
    }
}

/// The +/-1 signs of a 64-bit pattern, MSB first.
pub fn pattern_signs(pattern: u64) -> Vec<f64> {
    (0..64).map(|i| pattern_sign(pattern, i)).collect()
}
