//! Simulation and design toolkit for single-pulse Rydberg-blockade phase gates
//! driven by zero-area, amplitude-modulated fields.
//!
//! Two atoms with qubit states `|0>`, `|1>` and a Rydberg level `|r>` are
//! driven on the `|1> <-> |r>` transition by two orthogonal quadratures
//! `Omega(t) sin(omega_e t)` and `Omega(t) cos(omega_e t)`. The crate
//!
//! - builds the Hamiltonians in the full two-atom space and in the rotating
//!   frames of the single-excitation and `|11>` subspaces ([`model`]),
//! - integrates the Schrödinger equation and extracts continuously unwrapped
//!   phases ([`propagator`]),
//! - evaluates the adiabatic and limiting closed forms ([`analytic`]),
//! - assembles and scores the diagonal phase gate ([`gate`]),
//! - solves for optimal drive parameters and sweeps parameter planes
//!   ([`design`]),
//! - quantifies robustness against parameter noise ([`noise`]),
//! - runs a cross-validation battery ([`check`]).
//!
//! Time is measured in units of the pulse width `t_p`; all frequencies are in
//! units of `1/t_p`.

pub mod analytic;
pub mod check;
pub mod design;
pub mod gate;
pub mod model;
pub mod noise;
pub mod ode;
pub mod output;
pub mod propagator;
pub mod quadrature;

mod error;

pub use error::{Error, Result};
pub use model::{HamiltonianKind, PulseParams, SystemParams};

/// Complex amplitude type used throughout the crate.
pub type C64 = num_complex::Complex64;
