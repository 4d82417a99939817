//! Truncated Fock-space states and the displacement operation.
//!
//! States live on the number basis `|0> .. |N-1>` as dense complex density
//! matrices. Every constructor renormalizes over the truncated basis and
//! records the probability mass it estimates to live beyond the cutoff in
//! `tail_mass_bound`, so downstream operations can reason about truncation
//! error explicitly. A useful cutoff heuristic for amplitude-`a` states is
//! `N >= (|a| + 3)^2`, which keeps the tail below ~1e-12.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::Tolerances;

/// Truncated complex density matrix of the cavity mode.
#[derive(Debug, Clone, PartialEq)]
pub struct FockDensityMatrix {
    entries: Array2<Complex64>,
    tail_mass_bound: f64,
}

impl FockDensityMatrix {
    /// Wrap a raw matrix, checking shape, Hermiticity (1e-12) and trace
    /// (within 1e-9, the loosest contract any evolution operation carries).
    pub fn new(entries: Array2<Complex64>, tail_mass_bound: f64) -> Result<Self> {
        if entries.nrows() != entries.ncols() || entries.nrows() == 0 {
            return Err(Error::InvalidState(format!(
                "density matrix must be square and non-empty, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidState("non-finite matrix entry".into()));
        }
        let herm = linalg::hermiticity_defect(&entries);
        if herm > 1e-12 {
            return Err(Error::InvalidState(format!(
                "Hermiticity defect {herm:e} exceeds 1e-12"
            )));
        }
        let trace: Complex64 = entries.diag().iter().sum();
        if (trace.re - 1.0).abs() > 1e-9 || trace.im.abs() > 1e-12 {
            return Err(Error::InvalidState(format!(
                "trace {} + {}i departs from 1 beyond tolerance",
                trace.re, trace.im
            )));
        }
        if !(0.0..=1.0).contains(&tail_mass_bound) {
            return Err(Error::InvalidState(format!(
                "tail_mass_bound {tail_mass_bound} outside [0, 1]"
            )));
        }
        Ok(Self {
            entries,
            tail_mass_bound,
        })
    }

    // Internal constructor for matrices that are Hermitian and traced by
    // construction.
    pub(crate) fn from_checked(entries: Array2<Complex64>, tail_mass_bound: f64) -> Self {
        Self {
            entries,
            tail_mass_bound: tail_mass_bound.clamp(0.0, 1.0),
        }
    }

    /// Truncation dimension N.
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &Array2<Complex64> {
        &self.entries
    }

    pub fn entry(&self, m: usize, k: usize) -> Complex64 {
        self.entries[[m, k]]
    }

    /// Estimated probability mass beyond the truncation.
    pub fn tail_mass_bound(&self) -> f64 {
        self.tail_mass_bound
    }

    pub fn trace(&self) -> Complex64 {
        self.entries.diag().iter().sum()
    }

    /// Tr(rho^2); 1 for pure states.
    pub fn purity(&self) -> f64 {
        let mut acc = 0.0;
        for m in 0..self.dim() {
            for k in 0..self.dim() {
                acc += (self.entries[[m, k]] * self.entries[[k, m]]).re;
            }
        }
        acc
    }

    /// Full validator: Hermiticity, unit trace and positive semidefiniteness
    /// to the configured tolerances. The eigenvalue check is the expensive
    /// part, so this runs on demand rather than on every operation.
    pub fn validate(&self, tol: &Tolerances) -> Result<()> {
        let herm = linalg::hermiticity_defect(&self.entries);
        if herm > tol.hermiticity {
            return Err(Error::InvalidState(format!(
                "Hermiticity defect {herm:e} exceeds {:e}",
                tol.hermiticity
            )));
        }
        let trace = self.trace();
        if (trace.re - 1.0).abs() > tol.trace {
            return Err(Error::InvalidState(format!(
                "trace {} departs from 1 beyond {:e}",
                trace.re, tol.trace
            )));
        }
        let eigs = linalg::hermitian_eigenvalues(&self.entries);
        let min = eigs.first().copied().unwrap_or(0.0);
        if min < -tol.positivity {
            return Err(Error::InvalidState(format!(
                "smallest eigenvalue {min:e} below -{:e}",
                tol.positivity
            )));
        }
        Ok(())
    }

    /// Error unless the recorded tail mass is below `max_tail`.
    pub fn check_tail(&self, max_tail: f64) -> Result<()> {
        if self.tail_mass_bound > max_tail {
            return Err(Error::Truncation {
                context: "state tail mass",
                measure: self.tail_mass_bound,
                limit: max_tail,
            });
        }
        Ok(())
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::Domain("truncation dimension must be >= 1".into()));
    }
    Ok(())
}

fn pure_state_density(coeffs: &[Complex64], tail: f64) -> FockDensityMatrix {
    let n = coeffs.len();
    let mut entries = Array2::<Complex64>::zeros((n, n));
    for m in 0..n {
        for k in 0..n {
            entries[[m, k]] = coeffs[m] * coeffs[k].conj();
        }
    }
    FockDensityMatrix::from_checked(entries, tail)
}

/// Coherent state `|alpha0>` truncated to `dim` levels and renormalized.
///
/// `tail_mass_bound` is the Poisson mass the truncation discards.
pub fn coherent_state(alpha0: Complex64, dim: usize) -> Result<FockDensityMatrix> {
    check_dim(dim)?;
    let mut coeffs = vec![Complex64::new(0.0, 0.0); dim];
    coeffs[0] = Complex64::new((-alpha0.norm_sqr() / 2.0).exp(), 0.0);
    for m in 1..dim {
        coeffs[m] = coeffs[m - 1] * alpha0 / (m as f64).sqrt();
    }
    let mass: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
    if mass <= 0.0 {
        return Err(Error::Truncation {
            context: "coherent state mass",
            measure: 1.0,
            limit: 0.0,
        });
    }
    let norm = mass.sqrt();
    for c in &mut coeffs {
        *c /= norm;
    }
    Ok(pure_state_density(&coeffs, (1.0 - mass).max(0.0)))
}

/// Number state `|n><n|`.
pub fn fock_state(n: usize, dim: usize) -> Result<FockDensityMatrix> {
    check_dim(dim)?;
    if n >= dim {
        return Err(Error::IndexOutOfRange { index: n, dim });
    }
    let mut entries = Array2::<Complex64>::zeros((dim, dim));
    entries[[n, n]] = Complex64::new(1.0, 0.0);
    Ok(FockDensityMatrix::from_checked(entries, 0.0))
}

/// Relative sign of the two coherent components of a cat state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CatSign {
    /// `|a> + |-a>`: support on even number states only.
    Plus,
    /// `|a> - |-a>`: support on odd number states only.
    Minus,
}

impl CatSign {
    fn factor(self, m: usize) -> f64 {
        // 1 + sign * (-1)^m, written so the suppressed parity is exactly zero.
        match (self, m % 2) {
            (CatSign::Plus, 0) | (CatSign::Minus, 1) => 2.0,
            _ => 0.0,
        }
    }

    fn overlap_sign(self) -> f64 {
        match self {
            CatSign::Plus => 1.0,
            CatSign::Minus => -1.0,
        }
    }
}

/// Normalized superposition `|alpha0> + sign |-alpha0>`.
///
/// The parity selection is exact: the suppressed-parity coefficients are
/// identically zero, not merely small.
pub fn cat_state(alpha0: Complex64, sign: CatSign, dim: usize) -> Result<FockDensityMatrix> {
    check_dim(dim)?;
    let mut coeffs = vec![Complex64::new(0.0, 0.0); dim];
    let mut pow = Complex64::new((-alpha0.norm_sqr() / 2.0).exp(), 0.0);
    for m in 0..dim {
        coeffs[m] = pow * sign.factor(m);
        if m + 1 < dim {
            pow = pow * alpha0 / ((m + 1) as f64).sqrt();
        }
    }
    let mass: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
    if mass < 1e-290 {
        return Err(Error::Domain(
            "cat amplitude too small to normalize (odd cat needs alpha0 != 0)".into(),
        ));
    }
    // Infinite-basis norm of the unnormalized superposition.
    let full_mass = 2.0 * (1.0 + sign.overlap_sign() * (-2.0 * alpha0.norm_sqr()).exp());
    let norm = mass.sqrt();
    for c in &mut coeffs {
        *c /= norm;
    }
    let tail = (1.0 - mass / full_mass).max(0.0);
    Ok(pure_state_density(&coeffs, tail))
}

/// Thermal state with mean occupation `nbar`, renormalized over the cutoff.
pub fn thermal_state(nbar: f64, dim: usize) -> Result<FockDensityMatrix> {
    check_dim(dim)?;
    if !(nbar >= 0.0 && nbar.is_finite()) {
        return Err(Error::Domain(format!("nbar must be finite and >= 0, got {nbar}")));
    }
    let q = nbar / (1.0 + nbar);
    let mut weights = vec![0.0_f64; dim];
    let mut w = 1.0 - q;
    for slot in weights.iter_mut() {
        *slot = w;
        w *= q;
    }
    let mass: f64 = weights.iter().sum();
    let mut entries = Array2::<Complex64>::zeros((dim, dim));
    for (m, w) in weights.iter().enumerate() {
        entries[[m, m]] = Complex64::new(w / mass, 0.0);
    }
    let tail = q.powi(dim as i32);
    Ok(FockDensityMatrix::from_checked(entries, tail))
}

/// Displacement matrix `<m|D(beta)|n>` with `D(beta) = exp(beta a^dag - beta^* a)`,
/// evaluated element-wise from the associated-Laguerre closed form.
#[derive(Debug, Clone)]
pub struct DisplacementMatrix {
    matrix: Array2<Complex64>,
    unitarity_defect: f64,
}

impl DisplacementMatrix {
    pub fn matrix(&self) -> &Array2<Complex64> {
        &self.matrix
    }

    /// Worst column-norm deviation from 1 over the whole window. Columns
    /// whose displaced image spills past the cutoff lose norm, so for large
    /// `|beta|` this is dominated by the top of the basis; callers that only
    /// touch low-lying columns should gate on state-level trace drift
    /// instead (see [`displace_state`]).
    pub fn unitarity_defect(&self) -> f64 {
        self.unitarity_defect
    }

    /// Error if the global unitarity defect exceeds `max_defect`.
    pub fn require_unitarity(&self, max_defect: f64) -> Result<()> {
        if self.unitarity_defect > max_defect {
            return Err(Error::Truncation {
                context: "displacement unitarity",
                measure: self.unitarity_defect,
                limit: max_defect,
            });
        }
        Ok(())
    }
}

// Associated Laguerre polynomial L_k^{(a)}(x) by the three-term recurrence.
fn laguerre(degree: usize, order: usize, x: f64) -> f64 {
    let a = order as f64;
    let mut lm1 = 1.0; // L_0
    if degree == 0 {
        return lm1;
    }
    let mut l = 1.0 + a - x; // L_1
    for k in 2..=degree {
        let kf = k as f64;
        let next = ((2.0 * kf - 1.0 + a - x) * l - (kf - 1.0 + a) * lm1) / kf;
        lm1 = l;
        l = next;
    }
    l
}

/// Build the truncated displacement matrix for amplitude `beta`.
pub fn displacement_matrix(beta: Complex64, dim: usize) -> Result<DisplacementMatrix> {
    check_dim(dim)?;
    let x = beta.norm_sqr();
    let pref = (-x / 2.0).exp();
    let mut d = Array2::<Complex64>::zeros((dim, dim));
    for n in 0..dim {
        // m >= n: ratio sqrt(n!/m!) and power beta^{m-n}, built incrementally.
        let mut ratio = 1.0_f64;
        let mut pow = Complex64::new(1.0, 0.0);
        for m in n..dim {
            if m > n {
                ratio /= (m as f64).sqrt();
                pow *= beta;
            }
            d[[m, n]] = pow * (pref * ratio * laguerre(n, m - n, x));
        }
        // m < n: mirror formula with (-conj(beta))^{n-m}.
        let mut ratio = 1.0_f64;
        let mut pow = Complex64::new(1.0, 0.0);
        for gap in 1..=n {
            let m = n - gap;
            ratio /= ((m + 1) as f64).sqrt();
            pow *= -beta.conj();
            d[[m, n]] = pow * (pref * ratio * laguerre(m, gap, x));
        }
    }
    let mut defect = 0.0_f64;
    for n in 0..dim {
        let col_norm: f64 = (0..dim).map(|m| d[[m, n]].norm_sqr()).sum::<f64>().sqrt();
        defect = defect.max((col_norm - 1.0).abs());
    }
    Ok(DisplacementMatrix {
        matrix: d,
        unitarity_defect: defect,
    })
}

/// `D^dag(beta) rho D(beta)`.
///
/// The output trace equals the input trace up to the probability mass the
/// truncated displacement pushes past the cutoff; that drift is added to the
/// tail bookkeeping and gated against `tol.max_tail_mass`.
pub fn displace_state(
    rho: &FockDensityMatrix,
    beta: Complex64,
    tol: &Tolerances,
) -> Result<FockDensityMatrix> {
    let d = displacement_matrix(beta, rho.dim())?;
    let out = linalg::adjoint(d.matrix()).dot(rho.entries()).dot(d.matrix());
    let trace_in = rho.trace().re;
    let trace_out: Complex64 = out.diag().iter().sum();
    let drift = (trace_out.re - trace_in).abs();
    if drift > tol.max_tail_mass {
        return Err(Error::Truncation {
            context: "displacement trace drift",
            measure: drift,
            limit: tol.max_tail_mass,
        });
    }
    Ok(FockDensityMatrix::from_checked(
        out,
        rho.tail_mass_bound() + drift,
    ))
}

/// Half the sum of the absolute eigenvalues of `rho1 - rho2`.
pub fn trace_distance(rho1: &FockDensityMatrix, rho2: &FockDensityMatrix) -> Result<f64> {
    if rho1.dim() != rho2.dim() {
        return Err(Error::DimMismatch {
            left: rho1.dim(),
            right: rho2.dim(),
        });
    }
    let diff = rho1.entries() - rho2.entries();
    let eigs = linalg::hermitian_eigenvalues(&diff);
    Ok(0.5 * eigs.iter().map(|e| e.abs()).sum::<f64>())
}

/// Expectation of the number operator.
pub fn mean_photon(rho: &FockDensityMatrix) -> f64 {
    rho.entries()
        .diag()
        .iter()
        .enumerate()
        .map(|(m, z)| m as f64 * z.re)
        .sum()
}

/// A coherent drive of amplitude `alpha` applied for `t_drive` against decay
/// `gamma`, together with the effective phase-space displacement it induces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveSpec {
    pub alpha: Complex64,
    pub gamma: f64,
    pub t_drive: f64,
    /// Effective displacement amplitude; see
    /// [`effective_displacement`](crate::lindblad::effective_displacement).
    pub beta: Complex64,
}

impl DriveSpec {
    pub fn new(alpha: Complex64, gamma: f64, t_drive: f64) -> Result<Self> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::Domain(format!("gamma must be finite and >= 0, got {gamma}")));
        }
        if !(t_drive >= 0.0 && t_drive.is_finite()) {
            return Err(Error::Domain(format!(
                "t_drive must be finite and >= 0, got {t_drive}"
            )));
        }
        Ok(Self {
            alpha,
            gamma,
            t_drive,
            beta: crate::lindblad::effective_displacement(alpha, gamma, t_drive),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn default_tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn coherent_zero_amplitude_is_vacuum() {
        let rho = coherent_state(c(0.0, 0.0), 8).unwrap();
        assert_eq!(rho.entry(0, 0), c(1.0, 0.0));
        for m in 1..8 {
            assert_eq!(rho.entry(m, m), c(0.0, 0.0));
        }
        assert_eq!(rho.tail_mass_bound(), 0.0);
    }

    #[test]
    fn coherent_ground_weight_matches_poisson() {
        // Independent oracle: Poisson weights from explicit factorials,
        // renormalized over the same truncation.
        let rho = coherent_state(c(1.0, 0.0), 32).unwrap();
        let mut fact = 1.0_f64;
        let mut mass = 0.0;
        let mut weights = [0.0_f64; 32];
        for (m, w) in weights.iter_mut().enumerate() {
            if m > 0 {
                fact *= m as f64;
            }
            *w = (-1.0_f64).exp() / fact;
            mass += *w;
        }
        assert_relative_eq!(rho.entry(0, 0).re, weights[0] / mass, epsilon = 1e-14);
        assert_relative_eq!(rho.entry(0, 0).re, (-1.0_f64).exp(), epsilon = 1e-12);
        assert_relative_eq!(rho.entry(7, 7).re, weights[7] / mass, epsilon = 1e-14);
    }

    #[test]
    fn coherent_mean_photon_is_amplitude_squared() {
        let rho = coherent_state(c(1.5, 0.0), 64).unwrap();
        assert_relative_eq!(mean_photon(&rho), 2.25, epsilon = 1e-10);
        assert!(rho.tail_mass_bound() < 1e-12);
    }

    #[test]
    fn fock_state_basics() {
        let rho = fock_state(0, 4).unwrap();
        assert_eq!(rho.entry(0, 0), c(1.0, 0.0));
        let rho = fock_state(1, 4).unwrap();
        assert_eq!(rho.entry(1, 1), c(1.0, 0.0));
        let rho = fock_state(2, 16).unwrap();
        assert_relative_eq!(mean_photon(&rho), 2.0, epsilon = 1e-15);
        assert_relative_eq!(rho.purity(), 1.0, epsilon = 1e-15);
        assert!(matches!(
            fock_state(4, 4),
            Err(Error::IndexOutOfRange { index: 4, dim: 4 })
        ));
    }

    #[test]
    fn even_cat_odd_diagonal_is_exactly_zero() {
        let rho = cat_state(c(1.5, 0.0), CatSign::Plus, 64).unwrap();
        for m in (1..64).step_by(2) {
            assert_eq!(rho.entry(m, m), c(0.0, 0.0));
        }
        assert_relative_eq!(rho.trace().re, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn odd_cat_has_no_vacuum_component() {
        let rho = cat_state(c(1.5, 0.0), CatSign::Minus, 64).unwrap();
        assert_eq!(rho.entry(0, 0), c(0.0, 0.0));
        assert_eq!(rho.entry(2, 2), c(0.0, 0.0));
        assert!(rho.entry(1, 1).re > 0.0);
    }

    #[test]
    fn even_cat_zero_amplitude_limit_is_vacuum() {
        let rho = cat_state(c(0.0, 0.0), CatSign::Plus, 8).unwrap();
        assert_eq!(rho.entry(0, 0), c(1.0, 0.0));
        assert!(cat_state(c(0.0, 0.0), CatSign::Minus, 8).is_err());
    }

    #[test]
    fn thermal_state_geometric_weights() {
        let rho = thermal_state(0.0, 8).unwrap();
        assert_eq!(rho.entry(0, 0), c(1.0, 0.0));

        let rho = thermal_state(1.0, 64).unwrap();
        assert_relative_eq!(rho.entry(0, 0).re, 0.5, epsilon = 1e-12);
        assert_relative_eq!(rho.entry(1, 1).re, 0.25, epsilon = 1e-12);

        let rho = thermal_state(0.5, 64).unwrap();
        assert_relative_eq!(mean_photon(&rho), 0.5, epsilon = 1e-9);
    }

    #[test]
    fn constructors_pass_the_validator() {
        let tol = default_tol();
        coherent_state(c(1.2, 0.4), 48).unwrap().validate(&tol).unwrap();
        fock_state(3, 16).unwrap().validate(&tol).unwrap();
        cat_state(c(1.5, 0.0), CatSign::Plus, 48).unwrap().validate(&tol).unwrap();
        cat_state(c(1.5, 0.0), CatSign::Minus, 48).unwrap().validate(&tol).unwrap();
        thermal_state(0.7, 32).unwrap().validate(&tol).unwrap();
    }

    #[test]
    fn displacement_zero_is_identity() {
        let d = displacement_matrix(c(0.0, 0.0), 16).unwrap();
        let eye = Array2::<Complex64>::eye(16);
        assert!(linalg::max_abs(&(d.matrix() - &eye)) < 1e-15);
        assert!(d.unitarity_defect() < 1e-15);
    }

    #[test]
    fn displacement_vacuum_overlap() {
        // <0|D(1)|0> = e^{-1/2}; cross-checked against the truncated matrix
        // exponential of the generator beta a^dag - beta^* a.
        let dim = 32;
        let d = displacement_matrix(c(1.0, 0.0), dim).unwrap();
        assert_relative_eq!(d.matrix()[[0, 0]].re, (-0.5_f64).exp(), epsilon = 1e-12);

        let mut gen = Array2::<Complex64>::zeros((dim, dim));
        for n in 0..dim - 1 {
            let s = ((n + 1) as f64).sqrt();
            gen[[n + 1, n]] = c(s, 0.0); // beta a^dag with beta = 1
            gen[[n, n + 1]] = c(-s, 0.0); // -beta^* a
        }
        let expm = linalg::matrix_exp(&gen);
        // Compare the well-truncated low corner of the two routes.
        for m in 0..12 {
            for n in 0..12 {
                assert!((d.matrix()[[m, n]] - expm[[m, n]]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn displacement_first_column_is_coherent_state() {
        let beta = c(0.5, 0.5);
        let d = displacement_matrix(beta, 48).unwrap();
        let rho = coherent_state(beta, 48).unwrap();
        // D(beta)|0> = |beta>, so |column|^2 matches the coherent diagonal.
        for m in 0..48 {
            let col = d.matrix()[[m, 0]];
            assert!((col.norm_sqr() - rho.entry(m, m).re).abs() < 1e-10);
        }
    }

    #[test]
    fn displacement_inverse_on_headroom_window() {
        // D(beta) D(-beta) = 1 on the sub-block whose displaced images stay
        // inside the cutoff; the top of the basis necessarily leaks.
        for &beta in &[c(1.0, 0.0), c(0.0, 2.0), c(1.2, -1.1)] {
            let dim = 48;
            let d_plus = displacement_matrix(beta, dim).unwrap();
            let d_minus = displacement_matrix(-beta, dim).unwrap();
            let prod = d_plus.matrix().dot(d_minus.matrix());
            let window = 16;
            let mut worst = 0.0_f64;
            for m in 0..window {
                for k in 0..window {
                    let expect = if m == k { 1.0 } else { 0.0 };
                    worst = worst.max((prod[[m, k]] - c(expect, 0.0)).norm());
                }
            }
            assert!(worst < 1e-8, "beta {beta}: window defect {worst:e}");
        }
    }

    #[test]
    fn displace_state_zero_is_identity() {
        let rho = cat_state(c(1.5, 0.0), CatSign::Plus, 32).unwrap();
        let out = displace_state(&rho, c(0.0, 0.0), &default_tol()).unwrap();
        assert!(linalg::max_abs(&(out.entries() - rho.entries())) < 1e-14);
    }

    #[test]
    fn displaced_vacuum_mean_photon() {
        // D^dag(b)|0> is a coherent state of amplitude -b.
        let rho = fock_state(0, 48).unwrap();
        let b = c(1.3, -0.4);
        let out = displace_state(&rho, b, &default_tol()).unwrap();
        assert_relative_eq!(mean_photon(&out), b.norm_sqr(), epsilon = 1e-9);
        assert_relative_eq!(out.trace().re, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn displaced_fock_one_diagonal_matches_matrix_elements() {
        // Direct oracle: rho_out(m,m) = |<1|D(0.7)|m>|^2 for rho = |1><1|.
        let dim = 48;
        let rho = fock_state(1, dim).unwrap();
        let out = displace_state(&rho, c(0.7, 0.0), &default_tol()).unwrap();
        let d = displacement_matrix(c(0.7, 0.0), dim).unwrap();
        for m in 0..dim {
            let expect = d.matrix()[[1, m]].norm_sqr();
            assert!((out.entry(m, m).re - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn displace_round_trip_returns_state() {
        let rho = cat_state(c(1.5, 0.0), CatSign::Plus, 64).unwrap();
        let b = c(1.1, 0.7);
        let tol = default_tol();
        let there = displace_state(&rho, b, &tol).unwrap();
        let back = displace_state(&there, -b, &tol).unwrap();
        assert!(trace_distance(&rho, &back).unwrap() < 1e-8);
    }

    #[test]
    fn displace_state_flags_missing_headroom() {
        // A displacement far beyond the cutoff loses trace and must error.
        let rho = fock_state(0, 8).unwrap();
        let err = displace_state(&rho, c(4.0, 0.0), &default_tol()).unwrap_err();
        assert!(matches!(err, Error::Truncation { .. }));
    }

    #[test]
    fn trace_distance_basics() {
        let a = fock_state(0, 8).unwrap();
        let b = fock_state(1, 8).unwrap();
        assert_relative_eq!(trace_distance(&a, &a).unwrap(), 0.0, epsilon = 1e-14);
        assert_relative_eq!(trace_distance(&a, &b).unwrap(), 1.0, epsilon = 1e-12);
        let c16 = fock_state(0, 16).unwrap();
        assert!(trace_distance(&a, &c16).is_err());
    }

    #[test]
    fn drive_spec_matches_displacement_formula() {
        let alpha = c(0.5, 0.0);
        let d = DriveSpec::new(alpha, 1.0, 1.0).unwrap();
        let expect = -2.0 * alpha * (1.0 - (0.5_f64).exp());
        assert!((d.beta - expect).norm() < 1e-14);
        let d0 = DriveSpec::new(alpha, 0.0, 2.0).unwrap();
        assert!((d0.beta - alpha * 2.0).norm() < 1e-15);
    }
}
