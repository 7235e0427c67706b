//! Exact few-photon simulation and count analysis for a polarization-encoded
//! linear-optical quantum router.
//!
//! The crate is organized in layers:
//!
//! * [`fock`] — sparse Fock-state representation of few-photon states over
//!   labeled (spatial, polarization) modes, with exact multi-photon unitary
//!   evolution (bosonic bunching included).
//! * [`elements`] — Jones-calculus optical elements (wave plates, polarizing
//!   beam splitters, beam displacers, phase shifters) compiled to mode
//!   unitaries with documented phase conventions.
//! * [`circuit`] — ordered evolution through an element list, projective
//!   post-selection on detection patterns, and feed-forward branching.
//! * [`router`] — assembly of the two-control routing interferometer, its
//!   coherence-test variant, and routing results checked against the
//!   closed-form output state.
//! * [`noise`] — photon-number statistics of the three-photon source and
//!   estimation/simulation of accidental three-fold coincidences.
//! * [`analysis`] — estimators turning raw or simulated coincidence counts
//!   into routing probabilities, fidelities, contrasts and fringe
//!   visibilities with propagated uncertainties.
//!
//! All state and circuit operations are pure functions of immutable inputs
//! and safe to share across threads.

pub mod analysis;
pub mod circuit;
pub mod elements;
pub mod fock;
pub mod noise;
pub mod router;

mod linalg;

pub use num_complex::Complex64;
