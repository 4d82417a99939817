//! Atomic-inversion probe of the photon-number distribution.
//!
//! A resonant two-photon probe atom swept against interaction time reads out
//! the diagonal statistics as a cosine series,
//! `W(tau) = sum_m P_m cos((2m+3) lambda tau)`, and the distribution comes
//! back by inverting the series over one period,
//! `P_m = (2 lambda / pi) int_0^{tau_max} W(tau) cos((2m+3) lambda tau) dtau`
//! with `tau_max = pi / lambda`. The continuum cosines are exactly orthogonal
//! on that window, and the midpoint rule preserves the orthogonality for
//! every band-limited signal whose frequencies stay below the sampling bound,
//! so synthesis-plus-inversion round-trips are limited only by round-off.
//!
//! The probe sweep must fit well inside the cavity decay time, i.e. the
//! coupling must satisfy `lambda >> gamma`; that is a run-metadata concern,
//! not something these functions model.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reconstruct::PhotonDistribution;

/// Probe configuration: coupling, sweep sampling and recovery range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeSpec {
    /// Atom-field coupling constant (rad/time), > 0.
    pub lambda: f64,
    /// Number of midpoint samples over the sweep window.
    pub n_samples: usize,
    /// Highest photon index to recover (exclusive).
    pub m_max: usize,
}

impl ProbeSpec {
    pub fn new(lambda: f64, n_samples: usize, m_max: usize) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Domain(format!("lambda must be finite and > 0, got {lambda}")));
        }
        if n_samples == 0 || m_max == 0 {
            return Err(Error::Domain("n_samples and m_max must be >= 1".into()));
        }
        Ok(Self {
            lambda,
            n_samples,
            m_max,
        })
    }

    /// Sweep window `pi / lambda`.
    pub fn tau_max(&self) -> f64 {
        std::f64::consts::PI / self.lambda
    }

    /// The inversion resolves frequencies `(2m+3) lambda` only while
    /// `n_samples > 2 m_max + 3`.
    pub fn check_sampling(&self) -> Result<()> {
        let bound = 2 * self.m_max + 3;
        if self.n_samples <= bound {
            return Err(Error::Aliasing {
                n_samples: self.n_samples,
                m_max: self.m_max,
                bound,
            });
        }
        Ok(())
    }
}

/// Sampled atomic inversion over the sweep window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSignal {
    pub taus: Vec<f64>,
    pub values: Vec<f64>,
}

impl ProbeSignal {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Add zero-mean Gaussian measurement noise with the given standard
    /// deviation, deterministically from `seed`. Amplitude 0 is a no-op.
    pub fn with_noise(&self, amplitude: f64, seed: u64) -> ProbeSignal {
        if amplitude == 0.0 {
            return self.clone();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, amplitude).expect("amplitude is finite");
        ProbeSignal {
            taus: self.taus.clone(),
            values: self
                .values
                .iter()
                .map(|v| v + normal.sample(&mut rng))
                .collect(),
        }
    }
}

/// Synthesize the inversion signal of a photon distribution on the midpoint
/// grid `tau_j = (j + 1/2) tau_max / n_samples`.
pub fn inversion_signal(p: &PhotonDistribution, spec: &ProbeSpec) -> ProbeSignal {
    let n = spec.n_samples;
    let dt = spec.tau_max() / n as f64;
    let mut taus = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    for j in 0..n {
        let tau = (j as f64 + 0.5) * dt;
        let mut v = 0.0;
        for m in 0..p.len() {
            v += p.prob(m) * ((2 * m + 3) as f64 * spec.lambda * tau).cos();
        }
        taus.push(tau);
        values.push(v);
    }
    ProbeSignal { taus, values }
}

/// Invert a sampled inversion signal back to photon probabilities by the
/// midpoint-rule discretization of the cosine transform.
///
/// Uses the signal's own `tau` samples with uniform weights
/// `tau_max / n_samples`. The recovered values are estimates, not validated
/// probabilities: with measurement noise they can stray outside `[0, 1]`.
pub fn invert_fourier(sig: &ProbeSignal, spec: &ProbeSpec) -> Result<PhotonDistribution> {
    if sig.taus.len() != sig.values.len() {
        return Err(Error::Domain(format!(
            "signal has {} taus but {} values",
            sig.taus.len(),
            sig.values.len()
        )));
    }
    let n = sig.len();
    let bound = 2 * spec.m_max + 3;
    if n <= bound {
        return Err(Error::Aliasing {
            n_samples: n,
            m_max: spec.m_max,
            bound,
        });
    }
    let weight = spec.tau_max() / n as f64;
    let scale = 2.0 * spec.lambda / std::f64::consts::PI;
    let mut probs = Vec::with_capacity(spec.m_max);
    for m in 0..spec.m_max {
        let freq = (2 * m + 3) as f64 * spec.lambda;
        let mut acc = 0.0;
        for (tau, v) in sig.taus.iter().zip(sig.values.iter()) {
            acc += v * (freq * tau).cos();
        }
        probs.push(scale * weight * acc);
    }
    Ok(PhotonDistribution::from_estimate(probs))
}
