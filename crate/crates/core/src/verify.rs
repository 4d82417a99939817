//! The acceptance battery: every cross-check the toolkit promises, runnable
//! as one deterministic report.
//!
//! Each criterion pins its tolerance in code and reports the measured value
//! next to it. The `verify` CLI subcommand prints the rendered report and the
//! `acceptance` integration test asserts every line passes. Randomized
//! criteria draw from fixed-seed generators, so two runs of the battery
//! produce byte-identical reports.

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{channel_coefficients, ChannelParams};
use crate::error::Error;
use crate::exec;
use crate::fock::{
    cat_state, coherent_state, fock_state, thermal_state, trace_distance, CatSign,
    FockDensityMatrix,
};
use crate::lindblad::{
    apply_j3, apply_j_minus, apply_j_plus, default_step_count, evolve_closed_form,
    evolve_numerical, factorized_evolution,
};
use crate::probe::{inversion_signal, invert_fourier, ProbeSpec};
use crate::reconstruct::{
    binomial_series_identity_check, evolved_diagonal, quasiprob_direct, scan_grid, square_grid,
    weight_chi, weighted_sum, PhotonDistribution, QuasiprobSpec, WeightValue,
};
use crate::Tolerances;

/// One acceptance criterion with its measured value and verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct CriterionOutcome {
    pub id: usize,
    pub name: &'static str,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub detail: String,
}

impl CriterionOutcome {
    fn render(&self) -> String {
        format!(
            "{:>2}  {:<34} measured {:>12} tolerance {:>8}  {}  {}",
            self.id,
            self.name,
            format!("{:.3e}", self.measured),
            format!("{:.1e}", self.tolerance),
            if self.passed { "PASS" } else { "FAIL" },
            self.detail
        )
    }
}

/// Render the full report; no timestamps, byte-stable across reruns.
pub fn render_report(outcomes: &[CriterionOutcome]) -> String {
    let mut out = String::from("acceptance criteria\n");
    let mut passed = 0;
    for o in outcomes {
        out.push_str(&o.render());
        out.push('\n');
        if o.passed {
            passed += 1;
        }
    }
    out.push_str(&format!("result: {passed}/{} passed\n", outcomes.len()));
    out
}

/// Run the full battery in order.
pub fn run_all() -> Vec<CriterionOutcome> {
    vec![
        reconstruction_identity(),
        channel_independence(),
        diagonal_vs_full_propagator(),
        drive_factorization(),
        thermal_steady_state(),
        weight_diagnostics(),
        pinned_analytic_values(),
        q_function_positivity(),
        probe_roundtrip(),
        binomial_resummation_identity(),
        superoperator_algebra(),
        report_determinism(),
    ]
}

fn test_channel() -> ChannelParams {
    ChannelParams::new(1.0, 0.2, 0.1).expect("valid channel")
}

fn cat_64() -> FockDensityMatrix {
    cat_state(Complex64::new(1.5, 0.0), CatSign::Plus, 64).expect("cat state")
}

/// Criterion 1: the reconstruction pipeline equals the direct evaluation of
/// the initial-state quasiprobability, point by point over a 21x21 grid.
pub fn reconstruction_identity() -> CriterionOutcome {
    let tolerance = 1e-8;
    let (worst, detail) = identity_deviation(false);
    CriterionOutcome {
        id: 1,
        name: "reconstruction identity",
        measured: worst,
        tolerance,
        passed: worst < tolerance && worst.is_finite(),
        detail,
    }
}

// Shared by criterion 1 and the harness sensitivity check. With
// `flip_chi_sign` the weighted sum runs with a corrupted weight, which a
// sound criterion must flag as a large deviation.
fn identity_deviation(flip_chi_sign: bool) -> (f64, String) {
    let tol = Tolerances::default();
    let rho = cat_64();
    let grid = square_grid(-3.0, 3.0, 0.3).expect("grid");
    let spec = QuasiprobSpec::new(0.0, grid.clone()).expect("spec");
    let p = test_channel();

    let points: Vec<Result<(f64, f64), Error>> = exec::map_slice(&grid, |beta| {
        let direct = quasiprob_direct(&rho, *beta, 0.0, &tol)?;
        let w_pipeline = if flip_chi_sign {
            corrupted_pipeline_value(&rho, *beta, &spec, &p, &tol)?
        } else {
            crate::reconstruct::reconstruct_point(&rho, *beta, &spec, &p, &tol)?.w_value
        };
        Ok((w_pipeline, direct))
    });

    let mut worst = 0.0_f64;
    for r in &points {
        match r {
            Ok((w, d)) => worst = worst.max((w - d).abs()),
            Err(e) => return (f64::INFINITY, format!("point failed: {e}")),
        }
    }
    (
        worst,
        "cat(1.5) dim 64, 21x21 over [-3,3]^2, gamma*t=0.1 nbar=0.2".into(),
    )
}

fn corrupted_pipeline_value(
    rho: &FockDensityMatrix,
    beta: Complex64,
    spec: &QuasiprobSpec,
    p: &ChannelParams,
    tol: &Tolerances,
) -> Result<f64, Error> {
    let c = channel_coefficients(p);
    let w = weight_chi(spec, &c)?;
    let bad = WeightValue {
        chi: -w.chi,
        chi_gamma_n: -w.chi_gamma_n,
        ..w
    };
    let rho_b = crate::fock::displace_state(rho, beta, tol)?;
    let p0 = PhotonDistribution::from_state(&rho_b);
    let p_t = evolved_diagonal(&p0, &c, rho.dim() + 16)?;
    let (f, _) = weighted_sum(&p_t, &bad, p_t.len(), f64::INFINITY)?;
    Ok(w.norm_factor * f)
}

/// Harness self-check: a sign-corrupted weight must blow the identity
/// criterion past its tolerance. Used by tests, not part of the battery.
pub fn chi_sign_flip_detected() -> bool {
    let (worst, _) = identity_deviation(true);
    !(worst < 1e-3)
}

/// Criterion 2: two different channels reconstruct the same quasiprobability
/// from the same initial state.
pub fn channel_independence() -> CriterionOutcome {
    let tolerance = 1e-7;
    let tol = Tolerances::default();
    let rho = cat_64();
    let grid = square_grid(-3.0, 3.0, 0.3).expect("grid");
    let spec = QuasiprobSpec::new(0.0, grid).expect("spec");
    let p1 = ChannelParams::new(1.0, 0.1, 0.05).expect("channel");
    let p2 = ChannelParams::new(1.0, 0.3, 0.2).expect("channel");

    let run = |p: &ChannelParams| scan_grid(&rho, &spec, p, &tol);
    let (a, b) = match (run(&p1), run(&p2)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => {
            return CriterionOutcome {
                id: 2,
                name: "channel independence",
                measured: f64::INFINITY,
                tolerance,
                passed: false,
                detail: format!("scan failed: {e}"),
            }
        }
    };
    let mut worst = 0.0_f64;
    let mut all_converged = true;
    for (x, y) in a.points.iter().zip(b.points.iter()) {
        all_converged &= x.converged && y.converged;
        worst = worst.max((x.w_value - y.w_value).abs());
    }
    CriterionOutcome {
        id: 2,
        name: "channel independence",
        measured: worst,
        tolerance,
        passed: all_converged && worst < tolerance,
        detail: "channels (gt,nbar)=(0.05,0.1) vs (0.2,0.3), cat(1.5) s=0".into(),
    }
}

/// Criterion 3: the explicit diagonal propagator reproduces the diagonal of
/// the full closed-form map on random distributions.
pub fn diagonal_vs_full_propagator() -> CriterionOutcome {
    let tolerance = 1e-10;
    let tol = Tolerances::default();
    let dim = 32;
    let p = ChannelParams::new(1.0, 0.5, 0.3).expect("channel");
    let c = channel_coefficients(&p);
    let mut rng = ChaCha8Rng::seed_from_u64(0x0e14_0c12);
    let mut worst = 0.0_f64;
    for _ in 0..20 {
        let mut probs = vec![0.0_f64; dim];
        let mut total = 0.0;
        for slot in probs.iter_mut() {
            *slot = rng.gen_range(0.0..1.0);
            total += *slot;
        }
        for slot in probs.iter_mut() {
            *slot /= total;
        }
        let p0 = PhotonDistribution::from_probs(probs.clone(), 0.0).expect("distribution");
        let mut entries = Array2::<Complex64>::zeros((dim, dim));
        for (m, pr) in probs.iter().enumerate() {
            entries[[m, m]] = Complex64::new(*pr, 0.0);
        }
        let rho = FockDensityMatrix::new(entries, 0.0).expect("state");

        let diag_route = evolved_diagonal(&p0, &c, dim).expect("diagonal route");
        let full_route = evolve_closed_form(&rho, &c, p.gamma_t(), &tol).expect("full route");
        for m in 0..dim {
            worst = worst.max((diag_route.prob(m) - full_route.entry(m, m).re).abs());
        }
    }
    CriterionOutcome {
        id: 3,
        name: "diagonal map = full propagator",
        measured: worst,
        tolerance,
        passed: worst < tolerance,
        detail: "20 seeded random diagonals, dim 32, gamma*t=0.3 nbar=0.5".into(),
    }
}

/// Criterion 4: drive factorization (displace, then decay) matches the
/// brute-force integration of the driven master equation.
pub fn drive_factorization() -> CriterionOutcome {
    let tolerance = 1e-6;
    let tol = Tolerances::default();
    let dim = 48;
    let alpha = Complex64::new(0.5, 0.0);
    let states = [
        ("vacuum", fock_state(0, dim).expect("vacuum")),
        (
            "cat",
            cat_state(Complex64::new(1.5, 0.0), CatSign::Plus, dim).expect("cat"),
        ),
    ];
    let mut worst = 0.0_f64;
    for (name, rho) in &states {
        for &nbar in &[0.0, 0.2] {
            for &t in &[0.1, 1.0] {
                let p = ChannelParams::new(1.0, nbar, t).expect("channel");
                let fact = match factorized_evolution(rho, alpha, &p, &tol) {
                    Ok(s) => s,
                    Err(e) => return factorization_failure(format!("{name}: {e}"), tolerance),
                };
                let run = match evolve_numerical(rho, &p, alpha, default_step_count(&p, alpha)) {
                    Ok(r) => r,
                    Err(e) => return factorization_failure(format!("{name}: {e}"), tolerance),
                };
                let d = trace_distance(&fact, &run.state).expect("matching dims");
                worst = worst.max(d);
            }
        }
    }
    CriterionOutcome {
        id: 4,
        name: "drive factorization vs integrator",
        measured: worst,
        tolerance,
        passed: worst < tolerance,
        detail: "alpha=0.5, nbar in {0,0.2}, t in {0.1,1}, vacuum and cat".into(),
    }
}

fn factorization_failure(detail: String, tolerance: f64) -> CriterionOutcome {
    CriterionOutcome {
        id: 4,
        name: "drive factorization vs integrator",
        measured: f64::INFINITY,
        tolerance,
        passed: false,
        detail,
    }
}

/// Criterion 5: the undriven channel drives every state to the thermal state
/// of the bath by gamma*t = 20.
pub fn thermal_steady_state() -> CriterionOutcome {
    let tolerance = 1e-5;
    let tol = Tolerances::default();
    let dim = 64;
    let states = [
        cat_state(Complex64::new(1.5, 0.0), CatSign::Plus, dim).expect("cat"),
        coherent_state(Complex64::new(1.2, 0.0), dim).expect("coherent"),
        fock_state(5, dim).expect("fock"),
    ];
    let mut worst = 0.0_f64;
    for &nbar in &[0.0, 0.5, 1.0] {
        let p = ChannelParams::new(1.0, nbar, 20.0).expect("channel");
        let c = channel_coefficients(&p);
        let target = thermal_state(nbar, dim).expect("thermal");
        for rho in &states {
            match evolve_closed_form(rho, &c, p.gamma_t(), &tol) {
                Ok(out) => {
                    worst = worst.max(trace_distance(&out, &target).expect("matching dims"))
                }
                Err(e) => {
                    return CriterionOutcome {
                        id: 5,
                        name: "thermal steady state",
                        measured: f64::INFINITY,
                        tolerance,
                        passed: false,
                        detail: format!("evolution failed: {e}"),
                    }
                }
            }
        }
    }
    CriterionOutcome {
        id: 5,
        name: "thermal steady state",
        measured: worst,
        tolerance,
        passed: worst < tolerance,
        detail: "dim 64 states, nbar in {0, 0.5, 1}, gamma*t = 20".into(),
    }
}

/// Criterion 6: exact-fraction weight values and both failure paths of the
/// ill-conditioned regime.
pub fn weight_diagnostics() -> CriterionOutcome {
    let tolerance = 1e-12;
    let p = ChannelParams::new(1.0, 1.0, std::f64::consts::LN_2).expect("channel");
    let c = channel_coefficients(&p);

    let spec0 = QuasiprobSpec::new(0.0, vec![Complex64::new(0.0, 0.0)]).expect("spec");
    let (chi_err, diverges) = match weight_chi(&spec0, &c) {
        Ok(w) => {
            let p_t = PhotonDistribution::from_probs(vec![0.4, 0.3, 0.3], 1e-9).expect("dist");
            let nonconv = matches!(
                weighted_sum(&p_t, &w, 3, 1e-9),
                Err(Error::NonConvergent { .. })
            );
            ((w.chi - 5.0).abs(), !w.converged && nonconv)
        }
        Err(_) => (f64::INFINITY, false),
    };

    let spec_q = QuasiprobSpec::new(-1.0, vec![Complex64::new(0.0, 0.0)]).expect("spec");
    let singular = matches!(weight_chi(&spec_q, &c), Err(Error::SingularWeight { .. }));

    CriterionOutcome {
        id: 6,
        name: "exact weight values and failure paths",
        measured: chi_err,
        tolerance,
        passed: chi_err < tolerance && diverges && singular,
        detail: format!(
            "chi(s=0)=5 exact, divergence flagged: {diverges}, s=-1 singular: {singular}"
        ),
    }
}

/// Criterion 7: pinned analytic quasiprobability values through the full
/// pipeline.
pub fn pinned_analytic_values() -> CriterionOutcome {
    use std::f64::consts::PI;
    let tolerance = 1e-8;
    let tol = Tolerances::default();
    let p = test_channel();
    let origin = Complex64::new(0.0, 0.0);
    let spec_w = QuasiprobSpec::new(0.0, vec![origin]).expect("spec");
    let spec_q = QuasiprobSpec::new(-1.0, vec![origin]).expect("spec");

    let mut worst = 0.0_f64;
    let mut fail: Option<String> = None;
    let mut check = |name: &str, got: Result<f64, Error>, want: f64| match got {
        Ok(v) => worst = worst.max((v - want).abs()),
        Err(e) => fail = Some(format!("{name}: {e}")),
    };

    let vac = fock_state(0, 48).expect("vacuum");
    let one = fock_state(1, 48).expect("fock 1");
    check(
        "vacuum W(0;0)",
        crate::reconstruct::reconstruct_point(&vac, origin, &spec_w, &p, &tol).map(|r| r.w_value),
        2.0 / PI,
    );
    check(
        "fock1 W(0;0)",
        crate::reconstruct::reconstruct_point(&one, origin, &spec_w, &p, &tol).map(|r| r.w_value),
        -2.0 / PI,
    );
    check(
        "vacuum Q(1)",
        crate::reconstruct::reconstruct_point(&vac, Complex64::new(1.0, 0.0), &spec_q, &p, &tol)
            .map(|r| r.w_value),
        (-1.0_f64).exp() / PI,
    );

    CriterionOutcome {
        id: 7,
        name: "pinned analytic values",
        measured: worst,
        tolerance,
        passed: fail.is_none() && worst < tolerance,
        detail: fail.unwrap_or_else(|| "2/pi, -2/pi and e^{-1}/pi through the pipeline".into()),
    }
}

/// Criterion 8: reconstructed Q functions never dip below -1e-9.
pub fn q_function_positivity() -> CriterionOutcome {
    let bound = 1e-9;
    let tol = Tolerances::default();
    let p = test_channel();
    let grid = square_grid(-3.0, 3.0, 0.5).expect("grid");
    let spec = QuasiprobSpec::new(-1.0, grid).expect("spec");
    let dim = 64;
    let states = [
        fock_state(0, dim).expect("vacuum"),
        fock_state(1, dim).expect("fock 1"),
        coherent_state(Complex64::new(1.0, 0.0), dim).expect("coherent"),
        cat_state(Complex64::new(1.5, 0.0), CatSign::Plus, dim).expect("even cat"),
        cat_state(Complex64::new(1.5, 0.0), CatSign::Minus, dim).expect("odd cat"),
        thermal_state(0.5, dim).expect("thermal"),
    ];
    let mut min_w = f64::INFINITY;
    let mut all_converged = true;
    for rho in &states {
        match scan_grid(rho, &spec, &p, &tol) {
            Ok(scan) => {
                for pt in &scan.points {
                    all_converged &= pt.converged;
                    min_w = min_w.min(pt.w_value);
                }
            }
            Err(_) => all_converged = false,
        }
    }
    let negativity = (-min_w).max(0.0);
    CriterionOutcome {
        id: 8,
        name: "Q-function positivity",
        measured: negativity,
        tolerance: bound,
        passed: all_converged && negativity <= bound,
        detail: format!("six test states, s=-1, 13x13 grid; min W = {min_w:.3e}"),
    }
}

/// Criterion 9: probe synthesis followed by Fourier inversion round-trips,
/// with the quadrature error falling at least second order in the sample
/// count (band-limited signals sit at the round-off floor).
pub fn probe_roundtrip() -> CriterionOutcome {
    let delta_tol = 1e-10_f64;
    let poisson_tol = 1e-6_f64;

    let poisson = {
        let mut probs = vec![0.0_f64; 32];
        let mut fact = 1.0;
        for (m, slot) in probs.iter_mut().enumerate() {
            if m > 0 {
                fact *= m as f64;
            }
            *slot = (-1.0_f64).exp() / fact;
        }
        let tail = (1.0 - probs.iter().sum::<f64>()).max(0.0);
        PhotonDistribution::from_probs(probs, tail).expect("poisson")
    };

    let spec = match ProbeSpec::new(1.0, 256, 20) {
        Ok(s) => s,
        Err(_) => unreachable!("valid spec"),
    };

    let mut worst_delta = 0.0_f64;
    for m in [0_usize, 3, 11, 19] {
        let mut probs = vec![0.0; 20];
        probs[m] = 1.0;
        let p = PhotonDistribution::from_probs(probs, 0.0).expect("delta");
        let sig = inversion_signal(&p, &spec);
        match invert_fourier(&sig, &spec) {
            Ok(rec) => {
                for k in 0..20 {
                    let expect = if k == m { 1.0 } else { 0.0 };
                    worst_delta = worst_delta.max((rec.raw()[k] - expect).abs());
                }
            }
            Err(_) => worst_delta = f64::INFINITY,
        }
    }

    let mut errs = Vec::new();
    for n in [64_usize, 128, 256] {
        let sp = ProbeSpec::new(1.0, n, 20).expect("spec");
        let sig = inversion_signal(&poisson, &sp);
        match invert_fourier(&sig, &sp) {
            Ok(rec) => {
                let worst = (0..20)
                    .map(|m| (rec.raw()[m] - poisson.prob(m)).abs())
                    .fold(0.0_f64, f64::max);
                errs.push(worst);
            }
            Err(_) => errs.push(f64::INFINITY),
        }
    }
    let second_order =
        errs[1] <= errs[0] / 4.0 + 1e-12 && errs[2] <= errs[1] / 4.0 + 1e-12;

    CriterionOutcome {
        id: 9,
        name: "probe round-trip",
        measured: worst_delta.max(errs[2]),
        tolerance: delta_tol.max(poisson_tol),
        passed: worst_delta < delta_tol && errs[2] < poisson_tol && second_order,
        detail: format!(
            "delta err {worst_delta:.3e}; poisson errs n=64/128/256: {:.3e}/{:.3e}/{:.3e}",
            errs[0], errs[1], errs[2]
        ),
    }
}

/// Criterion 10: the binomial resummation identity holds to 1e-9 across its
/// convergence disk samples.
pub fn binomial_resummation_identity() -> CriterionOutcome {
    let tolerance = 1e-9;
    let mut worst = 0.0_f64;
    for n in 0..=5 {
        for &x in &[0.1, 0.5, 0.9] {
            match binomial_series_identity_check(n, x) {
                Ok(d) => worst = worst.max(d),
                Err(_) => worst = f64::INFINITY,
            }
        }
    }
    CriterionOutcome {
        id: 10,
        name: "binomial resummation identity",
        measured: worst,
        tolerance,
        passed: worst < tolerance,
        detail: "n <= 5, x in {0.1, 0.5, 0.9}".into(),
    }
}

/// Criterion 11: the ladder superoperators close under commutation on random
/// Hermitian matrices, to machine precision.
pub fn superoperator_algebra() -> CriterionOutcome {
    let tolerance = 1e-12;
    let inner = 12;
    let outer = 16; // headroom so shifts stay inside the window
    let mut rng = ChaCha8Rng::seed_from_u64(0x0a11_0b0a);
    let mut worst = 0.0_f64;
    for _ in 0..5 {
        let mut rho = Array2::<Complex64>::zeros((outer, outer));
        for m in 0..inner {
            rho[[m, m]] = Complex64::new(rng.gen_range(-1.0..1.0), 0.0);
            for k in (m + 1)..inner {
                let z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                rho[[m, k]] = z;
                rho[[k, m]] = z.conj();
            }
        }
        let comm = apply_j_minus(&apply_j_plus(&rho)) - apply_j_plus(&apply_j_minus(&rho));
        worst = worst.max(crate::linalg::max_abs(&(&comm - &apply_j3(&rho))));

        let comm = apply_j3(&apply_j_plus(&rho)) - apply_j_plus(&apply_j3(&rho));
        let expect = apply_j_plus(&rho).mapv(|z| z * 2.0);
        worst = worst.max(crate::linalg::max_abs(&(&comm - &expect)));

        let comm = apply_j3(&apply_j_minus(&rho)) - apply_j_minus(&apply_j3(&rho));
        let expect = apply_j_minus(&rho).mapv(|z| z * -2.0);
        worst = worst.max(crate::linalg::max_abs(&(&comm - &expect)));
    }
    CriterionOutcome {
        id: 11,
        name: "superoperator commutators",
        measured: worst,
        tolerance,
        passed: worst < tolerance,
        detail: "[J-,J+] = J3 and [J3,J+-] = +-2 J+- on 5 seeded dim-12 matrices".into(),
    }
}

/// Criterion 12: the battery is deterministic. Re-runs the cheap and
/// seed-dependent criteria twice and byte-compares their rendered lines; the
/// CLI test harness additionally reruns the entire `verify` command and
/// compares whole reports.
pub fn report_determinism() -> CriterionOutcome {
    let run_subset = || -> String {
        let outcomes = vec![
            diagonal_vs_full_propagator(),
            weight_diagnostics(),
            probe_roundtrip(),
            binomial_resummation_identity(),
            superoperator_algebra(),
        ];
        render_report(&outcomes)
    };
    let a = run_subset();
    let b = run_subset();
    let identical = a == b;
    CriterionOutcome {
        id: 12,
        name: "report determinism",
        measured: if identical { 0.0 } else { 1.0 },
        tolerance: 0.0,
        passed: identical,
        detail: "seeded criteria re-run and byte-compared".into(),
    }
}
