//! Simulation and analysis toolkit for a single ²⁹Si nuclear spin coupled to
//! an electron in a silicon quantum dot.
//!
//! The crate is organised bottom-up:
//!
//! - [`spin`]: joint electron⊗nucleus Hilbert space, Hamiltonians, unitary
//!   propagation, quasi-static noise and dephasing channels.
//! - [`pulse`]: control timelines (pulses, free evolution, charge events,
//!   measurement markers) and the builders for the standard protocols.
//! - [`sim`]: executes a [`pulse::PulseSequence`] for one noise draw.
//! - [`experiments`]: Monte Carlo protocol drivers (chevron, Ramsey, Hahn,
//!   Bell tomography, error budget, shuttling).
//! - [`readout`]: single-shot electron readout, repetitive nuclear readout,
//!   the analytic majority-vote fidelity model and confusion correction.
//! - [`hyperfine`]: lattice Monte Carlo of contact hyperfine couplings.
//! - [`vanvleck`]: second-moment estimate of ²⁷Al gate dephasing.
//! - [`fit`]: least-squares fitters and event classification.
//!
//! Units used throughout: frequencies in MHz inside Hamiltonians (kHz at the
//! parameter surface where noted), times in μs, magnetic field in tesla.

pub mod error;
pub mod experiments;
pub mod fit;
pub mod hyperfine;
pub mod pulse;
pub mod readout;
pub mod rng;
pub mod sim;
pub mod spin;
pub mod vanvleck;

pub use error::{Error, Result};
