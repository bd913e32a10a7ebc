//! Exact simulation of non-Markovian decoherence in lattice spin gases.
//!
//! Environment spins ride on a classical lattice gas. Every contact between a
//! probe qubit and an environment spin adds to an interaction phase, and the
//! resulting interaction history fully determines the reduced state of the
//! probes. The pieces are:
//!
//! * [`kinematics`]: lattice-gas hopping with exclusion and phase accumulation.
//! * [`history`]: the probe/environment phase matrix and its file formats.
//! * [`decoherence`]: closed-form coherence factors and dephasing maps.
//! * [`mapstate`]: the channel built as a Hadamard product of per-particle
//!   Choi states, expressed in the Bell basis.
//! * [`states`]: Bell, cluster, GHZ-family and W probe states.
//! * [`entanglement`]: concurrence, partial transposes and negativities.
//! * [`analytic`]: closed-form decay, negativity and revival models.
//! * [`oracle`]: brute-force evolution of probe + environment.
//! * [`config`], [`ensemble`]: configuration files, Monte Carlo ensembles and
//!   CSV output.

pub mod analytic;
pub mod config;
pub mod decoherence;
pub mod density;
pub mod ensemble;
pub mod entanglement;
mod error;
pub mod history;
pub mod kinematics;
pub mod mapstate;
pub mod oracle;
pub mod states;

pub use error::{Error, Result};

pub use num_complex::Complex64;
