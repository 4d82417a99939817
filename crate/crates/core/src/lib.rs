//! Simulator and reconstruction toolkit for a single cavity mode damped by a
//! finite-temperature environment.
//!
//! The crate evolves truncated Fock-space density matrices under the driven
//! thermal master equation and recovers any s-parametrized quasiprobability
//! distribution of the *initial* field purely from weighted diagonal
//! photon-number statistics of the *decayed* field. Every closed form ships
//! with an independent brute-force route and the [`verify`] module pins the
//! whole battery of cross-checks.
//!
//! Module map:
//! - [`fock`]: states, displacement, metrics
//! - [`channel`]: decay coefficients of the thermal channel
//! - [`lindblad`]: closed-form propagator, drive factorization, RK4 oracle
//! - [`reconstruct`]: diagonal propagation, weighting, grid scans, oracle
//! - [`probe`]: atomic-inversion signal synthesis and Fourier inversion
//! - [`io`]: file formats
//! - [`verify`]: the acceptance battery behind the `verify` CLI subcommand

use serde::{Deserialize, Serialize};

pub mod channel;
pub mod error;
pub mod exec;
pub mod fock;
pub mod io;
pub mod linalg;
pub mod lindblad;
pub mod probe;
pub mod reconstruct;
pub mod verify;

pub use error::{Error, Result};

/// Numerical contracts used across the crate.
///
/// The defaults pin the advertised guarantees: constructors hold the trace to
/// 1e-10 and Hermiticity to 1e-12, the positivity validator tolerates
/// eigenvalues down to -1e-9, and displacement matrices are considered
/// degraded past a 1e-8 unitarity defect. `max_tail_mass` gates how much
/// probability an evolution or displacement may push past the truncation
/// before the operation refuses with a truncation error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub hermiticity: f64,
    pub trace: f64,
    pub positivity: f64,
    pub unitarity: f64,
    pub max_tail_mass: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            hermiticity: 1e-12,
            trace: 1e-10,
            positivity: 1e-9,
            unitarity: 1e-8,
            max_tail_mass: 1e-4,
        }
    }
}
