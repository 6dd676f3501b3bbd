//! Acceptance criteria, one PASS/FAIL line each. Exits non-zero on any failure.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nnmcert::certify::{
    certify_recovery, diagonal_embedding, direction_verdict, l1_weak_value, one_sided_derivative_estimate, oymak_value,
    prepare_ground_truth, CertifyOptions, GroundTruth, Mode, Status, VerdictCase,
};
use nnmcert::counterexample::{self, run_counterexample, GridSpec};
use nnmcert::lemmas::{
    lemma1_suite, lemma2_forward_suite, lemma2_reverse_suite, lemma3_biconditional_suite, lemma3_suite, SuiteReport,
};
use nnmcert::matcore::{nuclear_norm, random, Complex64, Field, Matrix, SvdFactors};
use nnmcert::operator::{apply, null_space_basis, operator_with_null_span};
use nnmcert::solver::{solve_nnm, SolverOptions};
use nnmcert::sweep::{run_sweep, SweepConfig, SweepReport};
use nnmcert::Result;

type Check = Result<std::result::Result<String, String>>;
type Criterion = (&'static str, Box<dyn FnOnce() -> Check>);

fn verdict(ok: bool, detail: String) -> std::result::Result<String, String> {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn timed(limit: Duration, f: impl FnOnce() -> Check) -> Check {
    let start = Instant::now();
    let out = f()?;
    let elapsed = start.elapsed();
    let note = format!("{:.3}s (limit {:.0}s)", elapsed.as_secs_f64(), limit.as_secs_f64());
    Ok(match out {
        Ok(d) if elapsed <= limit => Ok(format!("{d}; {note}")),
        Ok(d) => Err(format!("{d}; too slow: {note}")),
        Err(d) => Err(format!("{d}; {note}")),
    })
}

fn real_curve() -> Check {
    let table = run_counterexample(&GridSpec::Real {
        t_min: -2.0,
        t_max: 2.0,
        step: 0.01,
    })?;
    let strict = table
        .samples
        .iter()
        .filter(|s| s.param1.abs() >= 0.01 - 1e-12)
        .all(|s| s.numeric > 1.0 + 1e-6);
    let s = &table.summary;
    let ok = table.samples.len() == 401
        && s.max_abs_err <= 1e-9
        && (s.min_value - 1.0).abs() <= 1e-12
        && s.argmin == [0.0]
        && strict;
    Ok(verdict(
        ok,
        format!(
            "{} samples, max err {:.2e}, min {} at t = {:?}, strict away from 0: {strict}",
            table.samples.len(),
            s.max_abs_err,
            s.min_value,
            s.argmin
        ),
    ))
}

fn complex_curve() -> Check {
    let table = run_counterexample(&GridSpec::Complex {
        a_max: 2.0,
        a_step: 0.05,
        theta_step: PI / 16.0,
    })?;
    let ok = table.samples.len() == 41 * 32 && table.summary.max_abs_err <= 1e-9;
    Ok(verdict(
        ok,
        format!(
            "{} samples, max err {:.2e}",
            table.samples.len(),
            table.summary.max_abs_err
        ),
    ))
}

fn counterexample_certificate() -> Check {
    let cert = counterexample::certify_counterexample(Field::Real, &CertifyOptions::default())?;
    let gt = prepare_ground_truth(&counterexample::truth())?;
    let q = counterexample::direction();
    let plus = direction_verdict(&gt, &q, None)?;
    let minus = direction_verdict(&gt, &q.scale(-1.0), None)?;
    let recorded_zero = cert
        .directions
        .iter()
        .any(|d| d.case == VerdictCase::ZeroWithEscape && d.escapes.labels() == ["c"]);
    let ok = cert.status == Status::Unique
        && cert.mode == Mode::Exact
        && plus.case == VerdictCase::ZeroWithEscape
        && plus.escapes.labels() == ["c"]
        && plus.phi.abs() <= 1e-9
        && minus.case == VerdictCase::StrictlyPositive
        && (minus.phi - 2.0).abs() <= 1e-9
        && recorded_zero;
    Ok(verdict(
        ok,
        format!(
            "status {:?}/{:?}; +Q {:?} {:?} phi {:.1e}; -Q {:?} phi {}",
            cert.status,
            cert.mode,
            plus.case,
            plus.escapes.labels(),
            plus.phi,
            minus.case,
            minus.phi
        ),
    ))
}

fn non_uniqueness() -> Check {
    let x = Matrix::diag_real(&[1.0, 0.0]);
    let op = operator_with_null_span(&[Matrix::diag_real(&[-1.0, 1.0])])?;
    let gt = prepare_ground_truth(&x)?;
    let cert = certify_recovery(&gt, &null_space_basis(&op)?, &CertifyOptions::default())?;
    let Some(w) = &cert.witness else {
        return Ok(Err(format!("status {:?} without witness", cert.status)));
    };
    let at_t = nuclear_norm(&(&x + &w.q.scale(w.t)))?;
    let sol = solve_nnm(&op, &apply(&op, &x)?, &SolverOptions::default())?;
    let ok = cert.status == Status::NotUnique && (at_t - 1.0).abs() <= 1e-8 && (sol.objective - 1.0).abs() <= 1e-6;
    Ok(verdict(
        ok,
        format!(
            "status {:?}, witness t {:.4} with ||X+tQ||_* - 1 = {:.1e}, solver objective {}",
            cert.status,
            w.t,
            at_t - 1.0,
            sol.objective
        ),
    ))
}

fn lemma_suites() -> Check {
    let seed = 20_240_601;
    let suites: Vec<(&str, SuiteReport, f64)> = vec![
        ("lemma1", lemma1_suite(1000, seed)?, -1e-8),
        ("lemma3 bound", lemma3_suite(1000, seed)?, -1e-9),
        ("lemma2 forward", lemma2_forward_suite(500, seed)?, f64::NEG_INFINITY),
        ("lemma2 reverse", lemma2_reverse_suite(500, seed)?, f64::NEG_INFINITY),
        (
            "lemma3 biconditional",
            lemma3_biconditional_suite(500, 500, seed)?,
            f64::NEG_INFINITY,
        ),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, r, floor) in &suites {
        let gap_ok = r.min_gap_observed >= *floor;
        ok &= r.passed() && gap_ok;
        parts.push(format!(
            "{name}: {} trials, {} violations, {} dead-zone{}",
            r.trials,
            r.violations.len(),
            r.discarded_dead_zone,
            if floor.is_finite() {
                format!(", min gap {:.1e}", r.min_gap_observed)
            } else {
                String::new()
            }
        ));
    }
    Ok(verdict(ok, parts.join("; ")))
}

fn random_pair(rng: &mut ChaCha8Rng) -> (GroundTruth, Matrix) {
    let field = if rng.random::<bool>() {
        Field::Real
    } else {
        Field::Complex
    };
    let m = rng.random_range(2..=5);
    let n = rng.random_range(2..=5);
    let r = rng.random_range(1..=m.min(n));
    let x = random::low_rank(field, m, n, r, rng);
    let q = random::gaussian(field, m, n, rng);
    (prepare_ground_truth(&x).expect("finite random matrix"), q)
}

fn subdifferential_identity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut worst, mut monotone_breaks, mut misses) = (0.0f64, 0, 0);
    for _ in 0..200 {
        let (gt, q) = random_pair(&mut rng);
        let phi = oymak_value(&gt, &q)?;
        let e: Vec<f64> = [1e-2, 1e-4, 1e-6]
            .iter()
            .map(|&t| one_sided_derivative_estimate(&gt, &q, t))
            .collect::<Result<_>>()?;
        let rel = (e[2] - phi).abs() / (1.0 + phi.abs());
        worst = worst.max(rel);
        misses += usize::from(rel > 1e-4);
        // Quotients of a convex function shrink with t0; allow rounding of order eps/t0.
        let slack = 1e-9 * (1.0 + phi.abs());
        monotone_breaks += usize::from(e[0] < e[1] - slack || e[1] < e[2] - slack);
    }
    Ok(verdict(
        misses == 0 && monotone_breaks == 0,
        format!("200 pairs, worst |est - phi|/(1+|phi|) {worst:.1e}, {misses} misses, {monotone_breaks} monotonicity breaks"),
    ))
}

fn l1_specialization() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let n = rng.random_range(1..=8);
        let mut x = vec![0.0; n];
        let mut support = Vec::new();
        for (i, xi) in x.iter_mut().enumerate() {
            if rng.random_bool(0.5) {
                *xi = rng.random_range(0.1..3.0) * if rng.random::<bool>() { 1.0 } else { -1.0 };
                support.push(i);
            }
        }
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let a = l1_weak_value(&x, &support, &y)?;
        let b = oymak_value(&prepare_ground_truth(&diagonal_embedding(&x))?, &diagonal_embedding(&y))?;
        worst = worst.max((a - b).abs());
    }
    Ok(verdict(
        worst <= 1e-9,
        format!("200 triples, max |l1 - matrix| {worst:.1e}"),
    ))
}

fn cross_validation() -> Check {
    let mut configs = Vec::new();
    for n in 3..=6 {
        for r in 1..=2 {
            for d in 1..=3 {
                configs.push((n, r, n * n - d));
            }
        }
    }
    let mut reports: Vec<SweepReport> = Vec::new();
    for (k, &(n, r, m)) in configs.iter().enumerate() {
        let trials = if k < 100 % configs.len() {
            100 / configs.len() + 1
        } else {
            100 / configs.len()
        };
        reports.push(run_sweep(&SweepConfig::new(
            n,
            r,
            vec![m],
            trials,
            1000 * k as u64 + 8,
        ))?);
    }
    let s = SweepReport::merge(&reports).expect("nonempty");
    for d in &s.disagreements {
        println!("    disagreement: {d:?}");
    }
    let logged_ok = s.disagreements.iter().all(|d| d.within_tolerance);
    let ok = s.instances == 100 && s.agreement_rate >= 0.98 && logged_ok;
    Ok(verdict(
        ok,
        format!(
            "{} instances, {} band-edge, agreement {}/{} = {:.3}, {} disagreements (all within tolerance: {logged_ok})",
            s.instances,
            s.band_edge,
            s.agreed,
            s.counted,
            s.agreement_rate,
            s.disagreements.len()
        ),
    ))
}

/// The same `X` with every singular pair re-phased together and the zero
/// singular subspaces rotated independently.
fn other_svd(gt: &GroundTruth, rng: &mut ChaCha8Rng) -> Result<GroundTruth> {
    let SvdFactors { u, sigma, v } = gt.svd().clone();
    let field = gt.matrix().field();
    let r = gt.rank();
    let (m, n) = gt.shape();
    let phases: Vec<Complex64> = (0..r)
        .map(|_| match field {
            Field::Real => Complex64::new(if rng.random::<bool>() { 1.0 } else { -1.0 }, 0.0),
            Field::Complex => Complex64::from_polar(1.0, rng.random_range(0.0..2.0 * PI)),
        })
        .collect();
    let head = |k: usize| {
        let d: Vec<Complex64> = (0..k)
            .map(|i| phases.get(i).copied().unwrap_or(Complex64::new(1.0, 0.0)))
            .collect();
        match field {
            Field::Real => Matrix::diag_real(&d.iter().map(|z| z.re).collect::<Vec<_>>()),
            Field::Complex => {
                let entries: Vec<Complex64> = (0..k * k)
                    .map(|e| {
                        if e / k == e % k {
                            d[e / k]
                        } else {
                            Complex64::new(0.0, 0.0)
                        }
                    })
                    .collect();
                Matrix::complex(k, k, &entries).expect("k * k entries")
            }
        }
    };
    let tail = |k: usize, rng: &mut ChaCha8Rng| {
        if k > r {
            Matrix::block_diag(&Matrix::identity(field, r), &random::unitary(field, k - r, rng))
        } else {
            Matrix::identity(field, k)
        }
    };
    let tu = tail(m, rng);
    let tv = tail(n, rng);
    let factors = SvdFactors {
        u: &(&u * &head(m)) * &tu,
        sigma,
        v: &(&v * &head(n)) * &tv,
    };
    GroundTruth::from_factors(gt.matrix(), factors, r)
}

fn invariance_battery() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut homog, mut scale, mut svd_choice, mut unitary) = (0, 0, 0, 0);
    for _ in 0..200 {
        let (gt, q) = random_pair(&mut rng);
        let phi = oymak_value(&gt, &q)?;
        let c = rng.random_range(0.01..100.0);

        let scaled = oymak_value(&gt, &q.scale(c))?;
        homog += usize::from((scaled - c * phi).abs() > 1e-9 * (1.0 + c * phi.abs()));

        let base = direction_verdict(&gt, &q, None)?;
        let v = direction_verdict(&gt, &q.scale(c), None)?;
        scale += usize::from(v.case != base.case || v.escapes != base.escapes);

        let alt = other_svd(&gt, &mut rng)?;
        let phi_alt = oymak_value(&alt, &q)?;
        let case_alt = direction_verdict(&alt, &q, None)?.case;
        svd_choice += usize::from((phi_alt - phi).abs() > 1e-8 * (1.0 + phi.abs()) || case_alt != base.case);

        let field = gt.matrix().field();
        let (m, n) = gt.shape();
        let w = random::unitary(field, m, &mut rng);
        let z = random::unitary(field, n, &mut rng);
        let rotate = |a: &Matrix| &(&w * a) * &z.adjoint();
        let gt_rot = prepare_ground_truth(&rotate(gt.matrix()))?;
        let phi_rot = oymak_value(&gt_rot, &rotate(&q))?;
        unitary += usize::from((phi_rot - phi).abs() > 1e-8 * (1.0 + phi.abs()));
    }
    let ok = homog + scale + svd_choice + unitary == 0;
    Ok(verdict(
        ok,
        format!(
            "200 trials each; failures: homogeneity {homog}, verdict scale {scale}, svd choice {svd_choice}, unitary {unitary}"
        ),
    ))
}

fn main() -> ExitCode {
    let criteria: Vec<Criterion> = vec![
        (
            "1 real counterexample curve",
            Box::new(|| timed(Duration::from_secs(1), real_curve)),
        ),
        (
            "2 complex counterexample curve",
            Box::new(|| timed(Duration::from_secs(5), complex_curve)),
        ),
        ("3 counterexample certification", Box::new(counterexample_certificate)),
        ("4 non-uniqueness detection", Box::new(non_uniqueness)),
        (
            "5 lemma suites",
            Box::new(|| timed(Duration::from_secs(60), lemma_suites)),
        ),
        ("6 subdifferential identity", Box::new(subdifferential_identity)),
        ("7 l1 specialization", Box::new(l1_specialization)),
        (
            "8 cross-validation sweep",
            Box::new(|| timed(Duration::from_secs(300), cross_validation)),
        ),
        ("9 invariance battery", Box::new(invariance_battery)),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(Ok(detail)) => println!("PASS {name}: {detail}"),
            Ok(Err(detail)) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
            Err(e) => {
                failed += 1;
                println!("FAIL {name}: error {}: {e}", e.kind());
            }
        }
    }
    println!("acceptance: {} of 9 criteria passed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
