//! Recovery of s-parametrized quasiprobabilities of the *initial* field from
//! diagonal photon statistics of the *decayed* field.
//!
//! The chain per phase-space point `beta`:
//!
//! 1. displace the initial state, `rho_beta(0) = D^dag(beta) rho(0) D(beta)`,
//!    and take its photon-number distribution `P_k(0)`;
//! 2. push the distribution through the thermal channel,
//!    `P_m(t) = (1/(1+N_t)) sum_{k,n} C(k,n) C(m,n) Gamma_nbar^{m-n}
//!    Gamma_{nbar+1}^{k-n} z^n P_k(0)` with `z = e^{-gamma t}/(1+N_t)^2`
//!    ([`evolved_diagonal`]);
//! 3. form the weighted sum `F(beta; s) = sum_m chi_s^m P_m(t)` where the
//!    weight `chi_s = (u - Gamma_{nbar+1}) / (z + Gamma_nbar (u - Gamma_{nbar+1}))`,
//!    `u = (s+1)/(s-1)`, undoes the decay inside the diagonal
//!    ([`weight_chi`], [`weighted_sum`]);
//! 4. scale by `-2 (1+N_t)(1 - chi_s Gamma_nbar) / (pi (s-1))` to obtain
//!    `W(beta; s)`.
//!
//! The weighted sum telescopes through the binomial resummation
//! `sum_m C(m,n) x^m = x^n / (1-x)^{n+1}` (valid for `|x| < 1`, see
//! [`binomial_series_identity_check`]) applied at `x = chi_s Gamma_nbar`, so
//! the result equals `-2/(pi (s-1)) sum_k u^k <k|rho_beta(0)|k>` computed
//! directly from the initial state — the channel parameters drop out
//! entirely. [`quasiprob_direct`] evaluates that expression and serves as the
//! oracle for the whole pipeline.
//!
//! When `|chi_s Gamma_nbar| >= 1` the resummation leaves its convergence
//! disk: the weighted series over a heated (infinite-support) distribution
//! diverges, and the operations report a typed error instead of a silently
//! wrong number. Some parameter sets make the weight denominator vanish
//! exactly; those surface as [`Error::SingularWeight`].

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{channel_coefficients, ChannelCoefficients, ChannelParams};
use crate::error::{Error, Result};
use crate::exec;
use crate::fock::{displace_state, FockDensityMatrix};
use crate::Tolerances;

/// Largest photon index the diagonal propagator supports.
pub const MAX_PHOTON_INDEX: usize = 512;

/// Negative round-off probabilities above this magnitude are invalid.
const PROB_CLAMP: f64 = 1e-12;

/// Diagonal photon-number probabilities with truncation metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotonDistribution {
    probs: Vec<f64>,
    tail_bound: f64,
}

impl PhotonDistribution {
    /// Validated constructor: entries at least `-1e-12`, total at most
    /// `1 + 1e-9`.
    pub fn from_probs(probs: Vec<f64>, tail_bound: f64) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Domain("distribution needs at least one entry".into()));
        }
        if let Some(bad) = probs.iter().find(|p| !p.is_finite() || **p < -PROB_CLAMP) {
            return Err(Error::Domain(format!("invalid probability {bad}")));
        }
        let total: f64 = probs.iter().sum();
        if total > 1.0 + 1e-9 {
            return Err(Error::Domain(format!("probabilities sum to {total} > 1")));
        }
        if !(0.0..=1.0).contains(&tail_bound) {
            return Err(Error::Domain(format!("tail bound {tail_bound} outside [0, 1]")));
        }
        Ok(Self { probs, tail_bound })
    }

    /// Diagonal of a density matrix.
    pub fn from_state(rho: &FockDensityMatrix) -> Self {
        let probs = rho.entries().diag().iter().map(|z| z.re).collect();
        Self {
            probs,
            tail_bound: rho.tail_mass_bound().clamp(0.0, 1.0),
        }
    }

    /// Unvalidated wrapper for recovered estimates (e.g. Fourier-inverted
    /// probe signals), which may carry noise outside the probability range.
    pub fn from_estimate(probs: Vec<f64>) -> Self {
        Self {
            probs,
            tail_bound: 0.0,
        }
    }

    /// Truncation length M.
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Probability of `m` photons; round-off negatives above `-1e-12` read
    /// as zero, anything beyond the truncation as zero.
    pub fn prob(&self, m: usize) -> f64 {
        match self.probs.get(m) {
            Some(&p) if p < 0.0 && p >= -PROB_CLAMP => 0.0,
            Some(&p) => p,
            None => 0.0,
        }
    }

    pub fn raw(&self) -> &[f64] {
        &self.probs
    }

    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    /// Clamped total probability inside the truncation.
    pub fn total(&self) -> f64 {
        (0..self.len()).map(|m| self.prob(m)).sum()
    }
}

/// How far to take the weighted series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MmaxPolicy {
    /// Extend the evolved distribution until the projected tail of the
    /// weighted series falls below `tail_target`.
    Adaptive { tail_target: f64 },
    /// Sum exactly this many terms.
    Fixed(usize),
}

impl Default for MmaxPolicy {
    fn default() -> Self {
        MmaxPolicy::Adaptive { tail_target: 1e-12 }
    }
}

/// Order parameter, phase-space grid and truncation policy of a
/// reconstruction run.
#[derive(Debug, Clone, PartialEq)]
pub struct QuasiprobSpec {
    s: f64,
    grid: Vec<Complex64>,
    m_max: MmaxPolicy,
    tail_threshold: f64,
}

impl QuasiprobSpec {
    /// `s = 1` (and beyond) is excluded: every expression divides by `s - 1`.
    pub fn new(s: f64, grid: Vec<Complex64>) -> Result<Self> {
        if !(s < 1.0) {
            return Err(Error::Domain(format!("order parameter s must be < 1, got {s}")));
        }
        Ok(Self {
            s,
            grid,
            m_max: MmaxPolicy::default(),
            tail_threshold: 1e-9,
        })
    }

    pub fn with_m_max(mut self, policy: MmaxPolicy) -> Self {
        self.m_max = policy;
        self
    }

    pub fn with_tail_threshold(mut self, threshold: f64) -> Self {
        self.tail_threshold = threshold;
        self
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// `u = (s+1)/(s-1)`; `|u| <= 1` for `s <= 0`.
    pub fn u(&self) -> f64 {
        (self.s + 1.0) / (self.s - 1.0)
    }

    pub fn grid(&self) -> &[Complex64] {
        &self.grid
    }

    pub fn m_max(&self) -> MmaxPolicy {
        self.m_max
    }

    pub fn tail_threshold(&self) -> f64 {
        self.tail_threshold
    }
}

/// Square phase-space grid with inclusive bounds, imaginary part as the
/// outer (slow) axis. `step` must divide the span to within round-off.
pub fn square_grid(min: f64, max: f64, step: f64) -> Result<Vec<Complex64>> {
    if !(step > 0.0) || !step.is_finite() || max < min {
        return Err(Error::Domain(format!(
            "invalid grid bounds [{min}, {max}] with step {step}"
        )));
    }
    let count = ((max - min) / step).round() as usize + 1;
    if count > 4096 {
        return Err(Error::Domain(format!("grid axis of {count} points is too fine")));
    }
    let mut grid = Vec::with_capacity(count * count);
    for i in 0..count {
        let im = min + i as f64 * step;
        for r in 0..count {
            let re = min + r as f64 * step;
            grid.push(Complex64::new(re, im));
        }
    }
    Ok(grid)
}

/// The reconstruction weight and its normalization for one `(s, channel)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightValue {
    /// chi_s.
    pub chi: f64,
    /// chi_s * Gamma_nbar; the weighted series converges iff |this| < 1.
    pub chi_gamma_n: f64,
    /// `-2 (1+N_t)(1 - chi_s Gamma_nbar) / (pi (s-1))`.
    pub norm_factor: f64,
    pub converged: bool,
}

/// Evaluate the reconstruction weight for a given order parameter and channel.
pub fn weight_chi(spec: &QuasiprobSpec, c: &ChannelCoefficients) -> Result<WeightValue> {
    let s = spec.s();
    if !(s < 1.0) {
        return Err(Error::Domain(format!("order parameter s must be < 1, got {s}")));
    }
    let u = spec.u();
    let denom = c.z() + c.gamma_n * (u - c.gamma_n1);
    if denom.abs() < 1e-12 {
        // Recover the offending physical parameters for the report.
        let gamma_t = -c.exp_gt.ln();
        let nbar = if c.exp_gt < 1.0 {
            c.n_t / (1.0 - c.exp_gt)
        } else {
            0.0
        };
        return Err(Error::SingularWeight {
            s,
            gamma_t,
            nbar,
            denominator: denom,
        });
    }
    let chi = (u - c.gamma_n1) / denom;
    let chi_gamma_n = chi * c.gamma_n;
    let norm_factor =
        -2.0 * (1.0 + c.n_t) * (1.0 - chi_gamma_n) / (std::f64::consts::PI * (s - 1.0));
    Ok(WeightValue {
        chi,
        chi_gamma_n,
        norm_factor,
        converged: chi_gamma_n.abs() < 1.0,
    })
}

/// Precomputed linear map taking an input diagonal of length `k_in` to the
/// evolved diagonal of length `m_out`. Binomials are built by running
/// products, so indices up to [`MAX_PHOTON_INDEX`] stay inside f64 range;
/// all terms are non-negative, so no cancellation occurs.
#[derive(Debug, Clone)]
pub struct DiagonalPropagator {
    matrix: Array2<f64>,
    m_out: usize,
    k_in: usize,
    heats: bool,
}

impl DiagonalPropagator {
    pub fn new(c: &ChannelCoefficients, m_out: usize, k_in: usize) -> Result<Self> {
        if m_out > MAX_PHOTON_INDEX {
            return Err(Error::IndexRange {
                value: m_out,
                max: MAX_PHOTON_INDEX,
            });
        }
        if k_in == 0 || m_out < k_in {
            return Err(Error::Domain(format!(
                "output truncation {m_out} must cover the input truncation {k_in}"
            )));
        }

        // Binomial triangle C[i][j] for i < m_out, by the row recurrence
        // C(i, j+1) = C(i, j) (i - j) / (j + 1).
        let binom: Vec<Vec<f64>> = (0..m_out)
            .map(|i| {
                let mut row = vec![0.0; i + 1];
                row[0] = 1.0;
                for j in 0..i {
                    row[j + 1] = row[j] * (i - j) as f64 / (j + 1) as f64;
                }
                row
            })
            .collect();

        // Power tables; zero bases give [1, 0, 0, ...] which encodes the
        // vanishing-term conventions exactly.
        let pow_table = |base: f64, len: usize| -> Vec<f64> {
            let mut t = vec![0.0; len];
            let mut p = 1.0;
            for slot in t.iter_mut() {
                *slot = p;
                p *= base;
            }
            t
        };
        let gn_pow = pow_table(c.gamma_n, m_out);
        let g1_pow = pow_table(c.gamma_n1, m_out);
        let z_pow = pow_table(c.z(), m_out);
        let scale = 1.0 / (1.0 + c.n_t);

        let mut matrix = Array2::<f64>::zeros((m_out, k_in));
        for m in 0..m_out {
            for k in 0..k_in {
                let mut acc = 0.0;
                for n in 0..=m.min(k) {
                    // Pair each binomial with its small power before
                    // multiplying the pairs together.
                    let up = binom[m][n] * gn_pow[m - n];
                    let down = binom[k][n] * g1_pow[k - n];
                    acc += up * down * z_pow[n];
                }
                matrix[[m, k]] = acc * scale;
            }
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::Overflow("diagonal propagator entries"));
        }
        Ok(Self {
            matrix,
            m_out,
            k_in,
            heats: c.gamma_n > 0.0,
        })
    }

    pub fn m_out(&self) -> usize {
        self.m_out
    }

    /// Push a distribution through the channel. The output tail bound is the
    /// input mass that failed to land inside the output truncation. A heating
    /// channel (`Gamma_nbar > 0`) spreads any input over every photon number,
    /// so its output tail is floored at the smallest positive double even
    /// when the lost mass underflows the subtraction.
    pub fn apply(&self, p0: &PhotonDistribution) -> PhotonDistribution {
        let mut out = vec![0.0_f64; self.m_out];
        let k_used = self.k_in.min(p0.len());
        for (m, slot) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in 0..k_used {
                acc += self.matrix[[m, k]] * p0.prob(k);
            }
            *slot = acc;
        }
        let sum_out: f64 = out.iter().sum();
        let input_mass = p0.total() + p0.tail_bound();
        let mut tail = (input_mass - sum_out).clamp(0.0, 1.0);
        if self.heats {
            tail = tail.max(f64::MIN_POSITIVE);
        }
        PhotonDistribution {
            probs: out,
            tail_bound: tail,
        }
    }
}

/// Evolve a diagonal distribution through the thermal channel.
pub fn evolved_diagonal(
    p0: &PhotonDistribution,
    c: &ChannelCoefficients,
    m_out: usize,
) -> Result<PhotonDistribution> {
    if m_out < p0.len() {
        return Err(Error::Domain(format!(
            "output truncation {m_out} below input truncation {}",
            p0.len()
        )));
    }
    Ok(DiagonalPropagator::new(c, m_out, p0.len())?.apply(p0))
}

/// `F = sum_{m < m_max} chi^m P_m(t)` together with a bound on the neglected
/// `sum_{m >= m_max} |chi|^m P_m`.
///
/// The part of the tail covered by the distribution's own entries is summed
/// outright. Beyond the truncation the bound uses the recorded tail mass: for
/// `|chi| <= 1` the weights only shrink; for `|chi| > 1` inside the
/// convergence disk it assumes the evolved tail decays at least geometrically
/// with ratio `Gamma_nbar` (the thermal tail ratio the channel approaches),
/// giving `|chi|^M tail / (1 - |chi Gamma_nbar|)`. Outside the disk the tail
/// of any truncation-limited (hence effectively unbounded) distribution is
/// unbounded and the operation errors, carrying the partial sum.
pub fn weighted_sum(
    p_t: &PhotonDistribution,
    w: &WeightValue,
    m_max: usize,
    tail_threshold: f64,
) -> Result<(f64, f64)> {
    if m_max > p_t.len() {
        return Err(Error::Domain(format!(
            "m_max {m_max} exceeds distribution truncation {}",
            p_t.len()
        )));
    }
    // Kahan accumulation: the terms alternate in sign for chi < 0 and can
    // individually exceed the result by orders of magnitude.
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    let mut chi_pow = 1.0_f64;
    for m in 0..m_max {
        let term = chi_pow * p_t.prob(m);
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        chi_pow *= w.chi;
    }
    let partial = sum;

    let ratio = w.chi_gamma_n.abs();
    if ratio >= 1.0 && p_t.tail_bound() > 0.0 {
        return Err(Error::NonConvergent {
            chi_gamma_abs: ratio,
            partial_sum: partial,
        });
    }

    let chi_abs = w.chi.abs();
    let mut tail = 0.0_f64;
    let mut abs_pow = chi_abs.powi(m_max as i32);
    for m in m_max..p_t.len() {
        tail += abs_pow * p_t.prob(m);
        abs_pow *= chi_abs;
    }
    // abs_pow is now |chi|^trunc.
    let beyond = if p_t.tail_bound() == 0.0 {
        0.0
    } else if chi_abs <= 1.0 {
        abs_pow * p_t.tail_bound()
    } else {
        abs_pow * p_t.tail_bound() / (1.0 - ratio)
    };
    let tail_estimate = tail + beyond;
    if !tail_estimate.is_finite() || tail_estimate > tail_threshold {
        return Err(Error::TailAboveThreshold {
            tail_estimate,
            threshold: tail_threshold,
            partial_sum: partial,
        });
    }
    Ok((partial, tail_estimate))
}

/// One reconstructed grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub beta: (f64, f64),
    /// The weighted sum F(beta; s); a partial sum when not converged.
    pub f_value: f64,
    /// `norm_factor * f_value`.
    pub w_value: f64,
    pub tail_estimate: f64,
    pub converged: bool,
    /// Failure description for rows that did not converge.
    pub error: Option<String>,
}

impl PointResult {
    fn from_error(beta: Complex64, w: &WeightValue, err: Error) -> Self {
        let (f, tail) = match &err {
            Error::NonConvergent { partial_sum, .. } => (*partial_sum, f64::INFINITY),
            Error::TailAboveThreshold {
                partial_sum,
                tail_estimate,
                ..
            } => (*partial_sum, *tail_estimate),
            _ => (f64::NAN, f64::NAN),
        };
        PointResult {
            beta: (beta.re, beta.im),
            f_value: f,
            w_value: w.norm_factor * f,
            tail_estimate: tail,
            converged: false,
            error: Some(err.to_string()),
        }
    }
}

/// Run parameters and resolved truncations of a grid scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanMeta {
    pub channel: ChannelParams,
    pub s: f64,
    pub u: f64,
    pub weight: WeightValue,
    pub input_dim: usize,
    /// Output truncation of the evolved diagonals.
    pub m_out: usize,
    /// Number of weighted terms summed per point.
    pub m_max: usize,
    pub tail_threshold: f64,
}

/// Reconstructed quasiprobability over a grid, with run metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionResult {
    pub points: Vec<PointResult>,
    pub meta: ScanMeta,
}

// Pick the evolved-diagonal truncation. Beyond the input support the heated
// tail falls off at least like Gamma_nbar per level, so extend until
// |chi|^m Gamma_nbar^(m - trunc) clears the target.
fn resolve_m_out(policy: MmaxPolicy, trunc: usize, w: &WeightValue) -> usize {
    let m_out = match policy {
        MmaxPolicy::Fixed(m) => m.max(trunc),
        MmaxPolicy::Adaptive { tail_target } => {
            let ratio = w.chi_gamma_n.abs();
            if ratio == 0.0 {
                trunc
            } else if !w.converged {
                trunc + 32
            } else {
                let target = tail_target.max(1e-300).ln();
                let head = trunc as f64 * w.chi.abs().max(1.0).ln();
                let slack = ((target - head) / ratio.ln()).ceil();
                trunc + (slack.clamp(4.0, 256.0) as usize)
            }
        }
    };
    m_out.min(MAX_PHOTON_INDEX)
}

fn resolve_m_max(policy: MmaxPolicy, available: usize) -> usize {
    match policy {
        MmaxPolicy::Fixed(m) => m.min(available),
        MmaxPolicy::Adaptive { .. } => available,
    }
}

fn point_inner(
    rho0: &FockDensityMatrix,
    beta: Complex64,
    spec: &QuasiprobSpec,
    w: &WeightValue,
    prop: &DiagonalPropagator,
    tol: &Tolerances,
) -> Result<PointResult> {
    let rho_b = displace_state(rho0, beta, tol)?;
    let p0 = PhotonDistribution::from_state(&rho_b);
    let p_t = prop.apply(&p0);
    let m_max = resolve_m_max(spec.m_max(), p_t.len());
    let (f, tail) = weighted_sum(&p_t, w, m_max, spec.tail_threshold())?;
    Ok(PointResult {
        beta: (beta.re, beta.im),
        f_value: f,
        w_value: w.norm_factor * f,
        tail_estimate: tail,
        converged: true,
        error: None,
    })
}

/// Reconstruct `W(beta; s)` at a single phase-space point. Convergence and
/// truncation failures propagate as errors carrying diagnostics; use
/// [`scan_grid`] to collect failures per point instead.
pub fn reconstruct_point(
    rho0: &FockDensityMatrix,
    beta: Complex64,
    spec: &QuasiprobSpec,
    p: &ChannelParams,
    tol: &Tolerances,
) -> Result<PointResult> {
    let c = channel_coefficients(p);
    let w = weight_chi(spec, &c)?;
    let m_out = resolve_m_out(spec.m_max(), rho0.dim(), &w);
    let prop = DiagonalPropagator::new(&c, m_out, rho0.dim())?;
    point_inner(rho0, beta, spec, &w, &prop, tol)
}

fn scan_impl(
    rho0: &FockDensityMatrix,
    spec: &QuasiprobSpec,
    p: &ChannelParams,
    tol: &Tolerances,
    parallel: bool,
) -> Result<ReconstructionResult> {
    let c = channel_coefficients(p);
    let w = weight_chi(spec, &c)?;
    let m_out = resolve_m_out(spec.m_max(), rho0.dim(), &w);
    let prop = DiagonalPropagator::new(&c, m_out, rho0.dim())?;
    let eval = |beta: &Complex64| -> PointResult {
        point_inner(rho0, *beta, spec, &w, &prop, tol)
            .unwrap_or_else(|err| PointResult::from_error(*beta, &w, err))
    };
    let points = if parallel {
        exec::map_slice(spec.grid(), eval)
    } else {
        spec.grid().iter().map(eval).collect()
    };
    Ok(ReconstructionResult {
        points,
        meta: ScanMeta {
            channel: *p,
            s: spec.s(),
            u: spec.u(),
            weight: w,
            input_dim: rho0.dim(),
            m_out,
            m_max: resolve_m_max(spec.m_max(), m_out),
            tail_threshold: spec.tail_threshold(),
        },
    })
}

/// Reconstruct every grid point. Points are independent and evaluated as a
/// parallel map when the `parallel` feature is on; output ordering always
/// matches the grid. Per-point failures are recorded in their rows rather
/// than aborting the scan; only setup failures (a singular weight, an
/// invalid spec) abort.
pub fn scan_grid(
    rho0: &FockDensityMatrix,
    spec: &QuasiprobSpec,
    p: &ChannelParams,
    tol: &Tolerances,
) -> Result<ReconstructionResult> {
    scan_impl(rho0, spec, p, tol, true)
}

/// Sequential twin of [`scan_grid`]: same code path, same numbers, no thread
/// pool. Kept public as the baseline for the benchmark suite.
pub fn scan_grid_serial(
    rho0: &FockDensityMatrix,
    spec: &QuasiprobSpec,
    p: &ChannelParams,
    tol: &Tolerances,
) -> Result<ReconstructionResult> {
    scan_impl(rho0, spec, p, tol, false)
}

/// `W(beta; s) = -2/(pi (s-1)) sum_k u^k <k|rho_beta(0)|k>` evaluated
/// directly from the initial state, bypassing the channel. The oracle the
/// reconstruction pipeline is checked against.
pub fn quasiprob_direct(
    rho0: &FockDensityMatrix,
    beta: Complex64,
    s: f64,
    tol: &Tolerances,
) -> Result<f64> {
    if !(s < 1.0) {
        return Err(Error::Domain(format!("order parameter s must be < 1, got {s}")));
    }
    let u = (s + 1.0) / (s - 1.0);
    let rho_b = displace_state(rho0, beta, tol)?;
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    let mut u_pow = 1.0_f64;
    for z in rho_b.entries().diag().iter() {
        let term = u_pow * z.re;
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        u_pow *= u;
    }
    Ok(-2.0 / (std::f64::consts::PI * (s - 1.0)) * sum)
}

/// Absolute difference between the brute-force series
/// `sum_m C(m,n) x^m` and its closed form `x^n / (1-x)^{n+1}`.
///
/// The series is summed until its geometric tail bound drops below 1e-15 of
/// the accumulated value.
pub fn binomial_series_identity_check(n: usize, x: f64) -> Result<f64> {
    if n > 20 {
        return Err(Error::Domain(format!("n must be <= 20, got {n}")));
    }
    if !(x.abs() < 1.0) {
        return Err(Error::Domain(format!(
            "|x| must be < 1 (radius of convergence), got {x}"
        )));
    }
    let closed = x.powi(n as i32) / (1.0 - x).powi(n as i32 + 1);

    let mut term = x.powi(n as i32);
    let mut sum = term;
    let mut m = n;
    while m < 1_000_000 {
        m += 1;
        term *= x * m as f64 / (m - n) as f64;
        sum += term;
        let q = x.abs() * (m + 1) as f64 / (m + 1 - n) as f64;
        if q < 1.0 && term.abs() * q / (1.0 - q) < 1e-15 * sum.abs().max(1e-300) {
            break;
        }
    }
    Ok((sum - closed).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{cat_state, coherent_state, fock_state, thermal_state, CatSign};
    use crate::lindblad::evolve_closed_form;
    use approx::assert_relative_eq;
    use std::f64::consts::{LN_2, PI};

    fn c64(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn chan(gamma_t: f64, nbar: f64) -> ChannelParams {
        ChannelParams::new(1.0, nbar, gamma_t).unwrap()
    }

    fn spec_at(s: f64) -> QuasiprobSpec {
        QuasiprobSpec::new(s, vec![c64(0.0, 0.0)]).unwrap()
    }

    #[test]
    fn distribution_clamps_round_off_negatives() {
        let d = PhotonDistribution::from_probs(vec![0.5, -5e-13, 0.5], 0.0).unwrap();
        assert_eq!(d.prob(1), 0.0);
        assert_eq!(d.prob(0), 0.5);
        assert_eq!(d.prob(7), 0.0);
        assert!(PhotonDistribution::from_probs(vec![0.5, -1e-6], 0.0).is_err());
        assert!(PhotonDistribution::from_probs(vec![0.9, 0.2], 0.0).is_err());
    }

    #[test]
    fn weight_at_zero_time_is_u() {
        let c = channel_coefficients(&chan(0.0, 0.7));
        for &s in &[-1.0, -0.5, 0.0] {
            let w = weight_chi(&spec_at(s), &c).unwrap();
            assert_relative_eq!(w.chi, (s + 1.0) / (s - 1.0), epsilon = 1e-14);
        }
    }

    #[test]
    fn weight_exact_fraction_divergent_case() {
        // s = 0, gamma t = ln 2, nbar = 1: chi = (-5/3)/(2/9 - 5/9) = 5,
        // chi * Gamma_nbar = 5/3, outside the convergence disk.
        let c = channel_coefficients(&chan(LN_2, 1.0));
        let w = weight_chi(&spec_at(0.0), &c).unwrap();
        assert_relative_eq!(w.chi, 5.0, epsilon = 1e-12);
        assert_relative_eq!(w.chi_gamma_n, 5.0 / 3.0, epsilon = 1e-12);
        assert!(!w.converged);
    }

    #[test]
    fn weight_singular_denominator() {
        // s = -1 at the same channel zeroes the denominator exactly.
        let c = channel_coefficients(&chan(LN_2, 1.0));
        let err = weight_chi(&spec_at(-1.0), &c).unwrap_err();
        assert!(matches!(err, Error::SingularWeight { .. }));
        if let Error::SingularWeight { s, nbar, .. } = err {
            assert_eq!(s, -1.0);
            assert_relative_eq!(nbar, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn weight_recomputable_from_algebra() {
        let c = channel_coefficients(&chan(0.4, 0.6));
        let spec = spec_at(-0.3);
        let w = weight_chi(&spec, &c).unwrap();
        let u = spec.u();
        let chi = (u - c.gamma_n1) / (c.z() + c.gamma_n * (u - c.gamma_n1));
        assert_relative_eq!(w.chi, chi, epsilon = 1e-14);
        let norm = -2.0 * (1.0 + c.n_t) * (1.0 - chi * c.gamma_n) / (PI * (spec.s() - 1.0));
        assert_relative_eq!(w.norm_factor, norm, epsilon = 1e-14);
        assert_eq!(w.converged, (chi * c.gamma_n).abs() < 1.0);
    }

    #[test]
    fn evolved_diagonal_identity_at_zero_time() {
        let c = channel_coefficients(&chan(0.0, 0.9));
        let p0 = PhotonDistribution::from_probs(vec![0.25, 0.5, 0.25], 0.0).unwrap();
        let out = evolved_diagonal(&p0, &c, 6).unwrap();
        assert_eq!(out.len(), 6);
        for m in 0..3 {
            assert_relative_eq!(out.prob(m), p0.prob(m), epsilon = 1e-15);
        }
        for m in 3..6 {
            assert_eq!(out.prob(m), 0.0);
        }
    }

    #[test]
    fn evolved_diagonal_single_photon_half_life() {
        let c = channel_coefficients(&chan(LN_2, 0.0));
        let p0 = PhotonDistribution::from_probs(vec![0.0, 1.0], 0.0).unwrap();
        let out = evolved_diagonal(&p0, &c, 4).unwrap();
        assert_relative_eq!(out.prob(0), 0.5, epsilon = 1e-14);
        assert_relative_eq!(out.prob(1), 0.5, epsilon = 1e-14);
        assert_eq!(out.prob(2), 0.0);
    }

    #[test]
    fn evolved_diagonal_matches_closed_form_for_displaced_cat() {
        // The diagonal map must reproduce the full propagator's diagonal.
        let dim = 48;
        let rho = cat_state(c64(1.5, 0.0), CatSign::Plus, dim).unwrap();
        let rho_b = displace_state(&rho, c64(0.8, -0.3), &tol()).unwrap();
        let p = chan(0.3, 0.5);
        let c = channel_coefficients(&p);

        let p0 = PhotonDistribution::from_state(&rho_b);
        let diag_route = evolved_diagonal(&p0, &c, dim).unwrap();
        let full_route = evolve_closed_form(&rho_b, &c, p.gamma_t(), &tol()).unwrap();
        let mut worst = 0.0_f64;
        for m in 0..dim {
            worst = worst.max((diag_route.prob(m) - full_route.entry(m, m).re).abs());
        }
        assert!(worst < 1e-10, "max diagonal deviation {worst:e}");
    }

    #[test]
    fn evolved_diagonal_random_inputs_match_closed_form() {
        let dim = 16;
        let p = chan(0.3, 0.5);
        let c = channel_coefficients(&p);
        let mut x = 0.17_f64;
        for _ in 0..5 {
            let mut probs = vec![0.0; dim];
            let mut total = 0.0;
            for slot in probs.iter_mut() {
                x = (x * 913.0 + 0.173).fract();
                *slot = x;
                total += x;
            }
            for slot in probs.iter_mut() {
                *slot /= total;
            }
            let p0 = PhotonDistribution::from_probs(probs.clone(), 0.0).unwrap();
            let mut entries = Array2::<Complex64>::zeros((dim, dim));
            for (m, pr) in probs.iter().enumerate() {
                entries[[m, m]] = c64(*pr, 0.0);
            }
            let rho = FockDensityMatrix::new(entries, 0.0).unwrap();

            let diag_route = evolved_diagonal(&p0, &c, dim).unwrap();
            let full_route = evolve_closed_form(&rho, &c, p.gamma_t(), &tol()).unwrap();
            for m in 0..dim {
                assert!((diag_route.prob(m) - full_route.entry(m, m).re).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn weighted_sum_degenerate_weights() {
        let p_t = PhotonDistribution::from_probs(vec![0.4, 0.3, 0.2, 0.1], 0.0).unwrap();
        let zero = WeightValue {
            chi: 0.0,
            chi_gamma_n: 0.0,
            norm_factor: 1.0,
            converged: true,
        };
        let (f, _) = weighted_sum(&p_t, &zero, 4, 1e-9).unwrap();
        assert_relative_eq!(f, 0.4, epsilon = 1e-15);

        let unit = WeightValue {
            chi: 1.0,
            chi_gamma_n: 0.0,
            norm_factor: 1.0,
            converged: true,
        };
        let (f, _) = weighted_sum(&p_t, &unit, 4, 1e-9).unwrap();
        assert_relative_eq!(f, 1.0, epsilon = 1e-15);
        assert!(f <= 1.0 + 1e-12);
    }

    #[test]
    fn weighted_sum_errors_outside_convergence_disk() {
        let p_t = PhotonDistribution::from_probs(vec![0.5, 0.3, 0.2], 1e-6).unwrap();
        let w = WeightValue {
            chi: 5.0,
            chi_gamma_n: 5.0 / 3.0,
            norm_factor: 1.0,
            converged: false,
        };
        let err = weighted_sum(&p_t, &w, 3, 1e-9).unwrap_err();
        match err {
            Error::NonConvergent {
                chi_gamma_abs,
                partial_sum,
            } => {
                assert_relative_eq!(chi_gamma_abs, 5.0 / 3.0, epsilon = 1e-14);
                assert_relative_eq!(partial_sum, 0.5 + 1.5 + 5.0, epsilon = 1e-12);
            }
            other => panic!("expected NonConvergent, got {other:?}"),
        }
        // Exactly finite support: the sum is legitimate even with |chi G| >= 1.
        let exact = PhotonDistribution::from_probs(vec![0.5, 0.3, 0.2], 0.0).unwrap();
        let (f, tail) = weighted_sum(&exact, &w, 3, 1e-9).unwrap();
        assert_relative_eq!(f, 7.0, epsilon = 1e-12);
        assert_eq!(tail, 0.0);
    }

    #[test]
    fn reconstruct_point_pinned_values() {
        // Vacuum Wigner at the origin, Fock-one Wigner at the origin and the
        // vacuum Q function at beta = 1, all through the full pipeline.
        let p = chan(0.1, 0.2);
        let t = tol();

        let vac = fock_state(0, 32).unwrap();
        let spec = spec_at(0.0);
        let pt = reconstruct_point(&vac, c64(0.0, 0.0), &spec, &p, &t).unwrap();
        assert_relative_eq!(pt.w_value, 2.0 / PI, epsilon = 1e-8);
        assert_relative_eq!(pt.w_value, spec_weight_norm(&spec, &p) * pt.f_value, epsilon = 1e-14);

        let one = fock_state(1, 32).unwrap();
        let pt = reconstruct_point(&one, c64(0.0, 0.0), &spec, &p, &t).unwrap();
        assert_relative_eq!(pt.w_value, -2.0 / PI, epsilon = 1e-8);

        let spec_q = spec_at(-1.0);
        let pt = reconstruct_point(&vac, c64(1.0, 0.0), &spec_q, &p, &t).unwrap();
        assert_relative_eq!(pt.w_value, (-1.0_f64).exp() / PI, epsilon = 1e-8);
    }

    fn spec_weight_norm(spec: &QuasiprobSpec, p: &ChannelParams) -> f64 {
        weight_chi(spec, &channel_coefficients(p)).unwrap().norm_factor
    }

    #[test]
    fn direct_quasiprob_vacuum_gaussian() {
        let vac = fock_state(0, 48).unwrap();
        assert_relative_eq!(
            quasiprob_direct(&vac, c64(0.0, 0.0), 0.0, &tol()).unwrap(),
            2.0 / PI,
            epsilon = 1e-12
        );
        for &beta in &[c64(0.3, 0.0), c64(-0.8, 0.5), c64(0.0, 1.2)] {
            let w = quasiprob_direct(&vac, beta, 0.0, &tol()).unwrap();
            let expect = 2.0 / PI * (-2.0 * beta.norm_sqr()).exp();
            assert_relative_eq!(w, expect, epsilon = 1e-10);
        }
    }

    #[test]
    fn direct_quasiprob_even_cat_interference_peak() {
        // An even cat is a +1 parity eigenstate, so its Wigner value at the
        // origin is the positivity ceiling 2/pi regardless of amplitude.
        // Independent oracle: parity-sum over independently built Poisson
        // weights.
        let dim = 64;
        let alpha = 1.5_f64;
        let cat = cat_state(c64(alpha, 0.0), CatSign::Plus, dim).unwrap();
        let w = quasiprob_direct(&cat, c64(0.0, 0.0), 0.0, &tol()).unwrap();

        let mut parity_sum = 0.0;
        let mut fact = 1.0;
        let mut mass = 0.0;
        for m in 0..dim {
            if m > 0 {
                fact *= m as f64;
            }
            let weight = if m % 2 == 0 {
                (-alpha * alpha).exp() * alpha.powi(2 * m as i32) / fact * 4.0
            } else {
                0.0
            };
            mass += weight;
            parity_sum += if m % 2 == 0 { weight } else { -weight };
        }
        let oracle = 2.0 / PI * parity_sum / mass;
        assert_relative_eq!(w, oracle, epsilon = 1e-12);
        assert_relative_eq!(w, 2.0 / PI, epsilon = 1e-10);
    }

    #[test]
    fn reconstruction_identity_small_grid() {
        // Pipeline vs direct evaluation on a 5x5 grid; the channel must drop
        // out entirely.
        let rho = cat_state(c64(1.5, 0.0), CatSign::Plus, 32).unwrap();
        let grid = square_grid(-1.0, 1.0, 0.5).unwrap();
        let spec = QuasiprobSpec::new(0.0, grid.clone()).unwrap();
        let p = chan(0.1, 0.2);
        let t = tol();
        let scan = scan_grid(&rho, &spec, &p, &t).unwrap();
        let mut worst = 0.0_f64;
        for (pt, beta) in scan.points.iter().zip(grid.iter()) {
            assert!(pt.converged);
            let direct = quasiprob_direct(&rho, *beta, 0.0, &t).unwrap();
            worst = worst.max((pt.w_value - direct).abs());
        }
        assert!(worst < 1e-9, "identity deviation {worst:e}");
    }

    #[test]
    fn channel_independence_on_sample_points() {
        let rho = cat_state(c64(1.2, 0.0), CatSign::Plus, 32).unwrap();
        let t = tol();
        let spec = spec_at(0.0);
        for &beta in &[c64(0.0, 0.0), c64(0.7, -0.4), c64(-1.0, 0.2)] {
            let w1 = reconstruct_point(&rho, beta, &spec, &chan(0.05, 0.1), &t)
                .unwrap()
                .w_value;
            let w2 = reconstruct_point(&rho, beta, &spec, &chan(0.2, 0.3), &t)
                .unwrap()
                .w_value;
            assert!((w1 - w2).abs() < 1e-9);
        }
    }

    #[test]
    fn scan_grid_edge_cases() {
        let rho = fock_state(0, 16).unwrap();
        let p = chan(0.1, 0.2);
        let t = tol();

        let empty = QuasiprobSpec::new(0.0, Vec::new()).unwrap();
        let scan = scan_grid(&rho, &empty, &p, &t).unwrap();
        assert!(scan.points.is_empty());

        // A one-point grid reduces to reconstruct_point bit-for-bit.
        let single = spec_at(0.0);
        let scan = scan_grid(&rho, &single, &p, &t).unwrap();
        let point = reconstruct_point(&rho, c64(0.0, 0.0), &single, &p, &t).unwrap();
        assert_eq!(scan.points[0], point);
    }

    #[test]
    fn scan_grid_parallel_matches_serial_exactly() {
        let rho = cat_state(c64(1.3, 0.2), CatSign::Plus, 24).unwrap();
        let spec = QuasiprobSpec::new(-0.4, square_grid(-1.0, 1.0, 0.25).unwrap()).unwrap();
        let p = chan(0.15, 0.3);
        let t = tol();
        let par = scan_grid(&rho, &spec, &p, &t).unwrap();
        let ser = scan_grid_serial(&rho, &spec, &p, &t).unwrap();
        assert_eq!(par, ser);
    }

    #[test]
    fn divergent_regime_is_reported_not_silently_wrong() {
        let rho = coherent_state(c64(1.0, 0.0), 24).unwrap();
        let p = chan(LN_2, 1.0);
        let spec = spec_at(0.0);
        let t = tol();
        let err = reconstruct_point(&rho, c64(0.0, 0.0), &spec, &p, &t).unwrap_err();
        assert!(matches!(err, Error::NonConvergent { .. }));

        let scan = scan_grid(&rho, &spec, &p, &t).unwrap();
        assert!(!scan.points[0].converged);
        assert!(scan.points[0].error.is_some());
        assert!(scan.points[0].tail_estimate.is_infinite());
        assert!(!scan.meta.weight.converged);
    }

    #[test]
    fn binomial_identity_values() {
        // n = 0 and n = 1 at x = 1/2 are the plain and differentiated
        // geometric series, both summing to 2.
        assert!(binomial_series_identity_check(0, 0.5).unwrap() < 1e-12);
        assert!(binomial_series_identity_check(1, 0.5).unwrap() < 1e-12);
        assert!(binomial_series_identity_check(5, 0.9).unwrap() < 1e-9);
        assert!(binomial_series_identity_check(5, -0.9).unwrap() < 1e-9);
        assert!(matches!(
            binomial_series_identity_check(3, 1.0),
            Err(Error::Domain(_))
        ));
        assert!(binomial_series_identity_check(21, 0.5).is_err());
    }

    #[test]
    fn q_function_never_negative() {
        let t = tol();
        let p = chan(0.1, 0.2);
        let spec = QuasiprobSpec::new(-1.0, square_grid(-2.0, 2.0, 0.5).unwrap()).unwrap();
        let states = [
            fock_state(1, 48).unwrap(),
            cat_state(c64(1.5, 0.0), CatSign::Minus, 48).unwrap(),
            thermal_state(0.5, 48).unwrap(),
        ];
        for rho in &states {
            let scan = scan_grid(rho, &spec, &p, &t).unwrap();
            for pt in &scan.points {
                assert!(pt.converged);
                assert!(pt.w_value >= -1e-9, "Q({:?}) = {}", pt.beta, pt.w_value);
            }
        }
    }

    #[test]
    fn wigner_grid_integral_is_normalized() {
        // Riemann sum of W(beta; 0) over [-4, 4]^2 at step 0.25. The state
        // must keep its displaced tail inside the cutoff over the whole
        // window, hence the generous dimension.
        let rho = fock_state(0, 84).unwrap();
        let step = 0.25;
        let spec = QuasiprobSpec::new(0.0, square_grid(-4.0, 4.0, step).unwrap()).unwrap();
        let p = chan(0.1, 0.2);
        let scan = scan_grid(&rho, &spec, &p, &tol()).unwrap();
        let integral: f64 = scan.points.iter().map(|pt| pt.w_value).sum::<f64>() * step * step;
        assert!((integral - 1.0).abs() < 0.02, "integral {integral}");
    }

    #[test]
    fn square_grid_shape() {
        let g = square_grid(-3.0, 3.0, 0.3).unwrap();
        assert_eq!(g.len(), 21 * 21);
        assert_eq!(g[0], c64(-3.0, -3.0));
        assert_eq!(g[20], c64(3.0, -3.0));
        assert_eq!(g[440], c64(3.0, 3.0));
        assert!(square_grid(1.0, -1.0, 0.5).is_err());
        assert!(square_grid(-1.0, 1.0, 0.0).is_err());
    }
}
