//! Pulse-level model of a continuous-variable QKD link with a receiver-local
//! oscillator, together with the secret-key-rate calculator that consumes its
//! estimates.
//!
//! The crate is split along the signal path:
//!
//! - [`units`] — quadrature samples, shot-noise-unit calibration, Z values
//! - [`rng`] — 16-bit entropy sources and Rayleigh-inversion Gaussian pairs
//! - [`tx`] — Gaussian encoding, Sagnac phase-amplitude modulator, packets
//! - [`channel`] — fiber loss, carrier phase, signal-reference offset,
//!   polarization drift, clock skew
//! - [`rx`] — pulsed heterodyne front-end, clone-bin bias handling,
//!   shot-noise calibration
//! - [`sync`] — timing lock, packet detection, polarization hill-climb
//! - [`recovery`] — two-stage carrier recovery (per-pair phase, packet delta)
//! - [`estimation`] — k regression, excess-noise extraction, phase-noise fit
//! - [`security`] — asymptotic and finite-size secret key rates
//! - [`sim`] — a full link wiring all of the above into seeded scenarios
//!
//! Everything is deterministic given a seed; no IO happens in this crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod channel;
pub mod cplx;
pub mod estimation;
pub mod recovery;
pub mod rng;
pub mod rx;
pub mod security;
pub mod sim;
pub mod sync;
pub mod tx;
pub mod units;

mod error;

pub use error::{Error, Result};
