//! Thermal-channel parameters and the derived decay coefficients.
//!
//! The damped mode at temperature `nbar` evolved for a time `t` is fully
//! characterized by three scalars: `N_t = nbar (1 - e^{-gamma t})`, the
//! downward weight `Gamma_{nbar+1}(t) = (nbar + 1)(1 - e^{-gamma t}) / (1 + N_t)`
//! and the upward weight `Gamma_nbar(t) = nbar (1 - e^{-gamma t}) / (1 + N_t)`.
//! Everything downstream (the closed-form propagator, the diagonal propagator
//! and the reconstruction weight) is built from these.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Decay constant, mean thermal photon number and evolution time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Cavity decay constant (1/time), >= 0.
    pub gamma: f64,
    /// Mean thermal photon number of the environment, >= 0.
    pub nbar: f64,
    /// Evolution time, >= 0.
    pub t: f64,
}

impl ChannelParams {
    pub fn new(gamma: f64, nbar: f64, t: f64) -> Result<Self> {
        let p = Self { gamma, nbar, t };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::Domain(format!("gamma must be finite and >= 0, got {}", self.gamma)));
        }
        if !(self.nbar >= 0.0 && self.nbar.is_finite()) {
            return Err(Error::Domain(format!("nbar must be finite and >= 0, got {}", self.nbar)));
        }
        if !(self.t >= 0.0 && self.t.is_finite()) {
            return Err(Error::Domain(format!("t must be finite and >= 0, got {}", self.t)));
        }
        Ok(())
    }

    /// Dimensionless elapsed decay, `gamma * t`.
    pub fn gamma_t(&self) -> f64 {
        self.gamma * self.t
    }
}

/// Derived decay quantities for a given `(gamma, nbar, t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelCoefficients {
    /// `N_t = nbar (1 - e^{-gamma t})`.
    pub n_t: f64,
    /// Upward (heating) weight `Gamma_nbar(t)`.
    pub gamma_n: f64,
    /// Downward (decay) weight `Gamma_{nbar+1}(t)`.
    pub gamma_n1: f64,
    /// Per-excitation factor of the diagonal scaling, `e^{-gamma t / 2} / (1 + N_t)`.
    pub x3: f64,
    /// `e^{-gamma t}`.
    pub exp_gt: f64,
}

impl ChannelCoefficients {
    /// The weight of each surviving excitation pair in the diagonal map,
    /// `e^{-gamma t} / (1 + N_t)^2`. Equals `x3^2`, kept explicit because the
    /// reconstruction weight divides by it.
    pub fn z(&self) -> f64 {
        self.exp_gt / ((1.0 + self.n_t) * (1.0 + self.n_t))
    }
}

/// Compute the decay coefficients for a channel.
pub fn channel_coefficients(p: &ChannelParams) -> ChannelCoefficients {
    let exp_gt = (-p.gamma_t()).exp();
    let decay = 1.0 - exp_gt;
    let n_t = p.nbar * decay;
    let one_plus = 1.0 + n_t;
    ChannelCoefficients {
        n_t,
        gamma_n: p.nbar * decay / one_plus,
        gamma_n1: (p.nbar + 1.0) * decay / one_plus,
        x3: (-p.gamma_t() / 2.0).exp() / one_plus,
        exp_gt,
    }
}
