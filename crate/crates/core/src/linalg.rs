//! Dense complex-matrix helpers: adjoints, norms, a Hermitian eigensolver and
//! a matrix exponential.
//!
//! Everything here works on `ndarray::Array2<Complex64>` at desk scale
//! (dimensions of a few hundred at most). The eigensolver is a cyclic complex
//! Jacobi iteration, which is deterministic and accurate to near machine
//! precision for the Hermitian matrices this crate produces.

use ndarray::Array2;
use num_complex::Complex64;

/// Conjugate transpose.
pub fn adjoint(a: &Array2<Complex64>) -> Array2<Complex64> {
    let mut out = a.t().to_owned();
    out.mapv_inplace(|z| z.conj());
    out
}

/// Largest entry modulus.
pub fn max_abs(a: &Array2<Complex64>) -> f64 {
    a.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Frobenius norm.
pub fn frobenius(a: &Array2<Complex64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest deviation |a[m,k] - conj(a[k,m])|.
pub fn hermiticity_defect(a: &Array2<Complex64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0_f64;
    for m in 0..n {
        for k in m..n {
            worst = worst.max((a[[m, k]] - a[[k, m]].conj()).norm());
        }
    }
    worst
}

/// Eigenvalues of a Hermitian matrix, ascending.
///
/// Cyclic Jacobi with complex rotations. Sweeps until the off-diagonal
/// Frobenius norm falls below `1e-14` times the matrix scale (quadratic
/// convergence makes this a handful of sweeps).
pub fn hermitian_eigenvalues(a: &Array2<Complex64>) -> Vec<f64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "hermitian_eigenvalues needs a square matrix");
    if n == 0 {
        return Vec::new();
    }
    let mut m = a.clone();
    let scale = frobenius(&m);
    let stop = 1e-14 * scale;

    for _sweep in 0..60 {
        let mut off_sq = 0.0_f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off_sq += m[[p, q]].norm_sqr();
            }
        }
        if (2.0 * off_sq).sqrt() <= stop {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                jacobi_rotate(&mut m, p, q);
            }
        }
    }

    let mut eigs: Vec<f64> = (0..n).map(|i| m[[i, i]].re).collect();
    eigs.sort_by(|x, y| x.partial_cmp(y).expect("eigenvalues are finite"));
    eigs
}

// One complex Jacobi rotation zeroing the (p, q) element of a Hermitian
// matrix: factor the phase out of a_pq, then apply the real rotation with
// tan(2 theta) = 2|a_pq| / (a_pp - a_qq).
fn jacobi_rotate(m: &mut Array2<Complex64>, p: usize, q: usize) {
    let apq = m[[p, q]];
    let r = apq.norm();
    if r == 0.0 {
        return;
    }
    let phase = apq / r;
    let app = m[[p, p]].re;
    let aqq = m[[q, q]].re;
    let theta = 0.5 * (2.0 * r).atan2(app - aqq);
    let (s, c) = theta.sin_cos();

    // U = diag(1, conj(phase)) * R(theta); the update is A <- U^dag A U.
    let u00 = Complex64::new(c, 0.0);
    let u01 = Complex64::new(-s, 0.0);
    let u10 = phase.conj() * s;
    let u11 = phase.conj() * c;

    let n = m.nrows();
    for i in 0..n {
        let aip = m[[i, p]];
        let aiq = m[[i, q]];
        m[[i, p]] = aip * u00 + aiq * u10;
        m[[i, q]] = aip * u01 + aiq * u11;
    }
    for j in 0..n {
        let apj = m[[p, j]];
        let aqj = m[[q, j]];
        m[[p, j]] = u00.conj() * apj + u10.conj() * aqj;
        m[[q, j]] = u01.conj() * apj + u11.conj() * aqj;
    }
    // Kill rotation round-off explicitly.
    m[[p, q]] = Complex64::new(0.0, 0.0);
    m[[q, p]] = Complex64::new(0.0, 0.0);
    m[[p, p]] = Complex64::new(m[[p, p]].re, 0.0);
    m[[q, q]] = Complex64::new(m[[q, q]].re, 0.0);
}

/// Matrix exponential by scaling-and-squaring with a Taylor series.
///
/// Accurate to near machine precision for the modest norms used here; serves
/// as the independent cross-check route for the analytic displacement matrix.
pub fn matrix_exp(a: &Array2<Complex64>) -> Array2<Complex64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "matrix_exp needs a square matrix");

    // Infinity norm decides the number of halvings.
    let inf_norm = (0..n)
        .map(|i| (0..n).map(|j| a[[i, j]].norm()).sum::<f64>())
        .fold(0.0_f64, f64::max);
    let squarings = if inf_norm > 0.25 {
        (inf_norm / 0.25).log2().ceil() as i32
    } else {
        0
    };
    let scale = 2.0_f64.powi(squarings);
    let scaled = a.mapv(|z| z / scale);

    let mut term = Array2::<Complex64>::eye(n);
    let mut sum = Array2::<Complex64>::eye(n);
    for k in 1..200_usize {
        term = term.dot(&scaled).mapv(|z| z / k as f64);
        sum += &term;
        if max_abs(&term) < 1e-20 {
            break;
        }
    }
    let mut out = sum;
    for _ in 0..squarings {
        out = out.dot(&out);
    }
    out
}
