//! Executable checks of the block nuclear-norm inequality, its equality
//! characterization, and the nuclear-norm/trace bound.
//!
//! Every predicate here has a randomized suite ([`run_suites`]) that the CLI
//! and the test-suite share.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{self, random, Field, Matrix, Orientation};

/// A square matrix split as `[A B; C D]` with `A` of size `p x p`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockQuad {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
    pub d: Matrix,
    pub assembled: Matrix,
}

impl BlockQuad {
    pub fn new(a: Matrix, b: Matrix, c: Matrix, d: Matrix) -> Result<BlockQuad> {
        if !a.is_square() || !d.is_square() {
            return Err(Error::Shape(format!(
                "diagonal blocks must be square, got {:?} and {:?}",
                a.shape(),
                d.shape()
            )));
        }
        let assembled = Matrix::block2x2(&a, &b, &c, &d)?;
        Ok(BlockQuad { a, b, c, d, assembled })
    }

    /// Splits a square matrix after its first `p` rows and columns.
    pub fn split(m: &Matrix, p: usize) -> Result<BlockQuad> {
        if !m.is_square() || p > m.rows() {
            return Err(Error::Shape(format!("cannot split a {:?} matrix at {p}", m.shape())));
        }
        let q = m.rows() - p;
        BlockQuad::new(
            m.block(0, 0, p, p),
            m.block(0, p, p, q),
            m.block(p, 0, q, p),
            m.block(p, p, q, q),
        )
    }

    pub fn p(&self) -> usize {
        self.a.rows()
    }

    pub fn q(&self) -> usize {
        self.d.rows()
    }
}

/// `||[A B; C D]||_* - (||A||_* + ||D||_*)`, which is never negative.
pub fn block_gap(q: &BlockQuad) -> Result<f64> {
    Ok(matcore::nuclear_norm(&q.assembled)? - matcore::nuclear_norm(&q.a)? - matcore::nuclear_norm(&q.d)?)
}

/// The assembled matrix seen through the singular frames of its diagonal blocks.
#[derive(Clone, Debug)]
pub struct EMatrix {
    pub e: Matrix,
    pub r_a: usize,
    pub r_d: usize,
    /// `[U_A Ubar_A]`, `[V_A Vbar_A]`, `[U_D Ubar_D]`, `[V_D Vbar_D]`.
    pub transforms: [Matrix; 4],
    p: usize,
}

impl EMatrix {
    pub fn left(&self) -> Matrix {
        Matrix::block_diag(&self.transforms[0], &self.transforms[2])
    }

    pub fn right(&self) -> Matrix {
        Matrix::block_diag(&self.transforms[1], &self.transforms[3])
    }

    /// `left E right^*`, which should give back the assembled matrix.
    pub fn reconstruct(&self) -> Matrix {
        &(&self.left() * &self.e) * &self.right().adjoint()
    }

    /// Indices of the leading `r_A` and `r_D` singular directions.
    pub fn support(&self) -> Vec<usize> {
        (0..self.r_a).chain(self.p..self.p + self.r_d).collect()
    }

    /// Diagonal 0/1 selector of [`EMatrix::support`].
    pub fn support_pattern(&self) -> Matrix {
        let n = self.e.rows();
        let mut diag = vec![0.0; n];
        for i in self.support() {
            diag[i] = 1.0;
        }
        Matrix::diag_real(&diag)
    }
}

#[allow(non_snake_case)]
pub fn build_E(q: &BlockQuad) -> Result<EMatrix> {
    let fa = matcore::svd(&q.a)?;
    let fd = matcore::svd(&q.d)?;
    let field = q.assembled.field();
    let transforms = [
        fa.u.promote(field),
        fa.v.promote(field),
        fd.u.promote(field),
        fd.v.promote(field),
    ];
    let mut out = EMatrix {
        e: Matrix::zeros(field, 0, 0),
        r_a: fa.rank(),
        r_d: fd.rank(),
        transforms,
        p: q.p(),
    };
    out.e = &(&out.left().adjoint() * &q.assembled) * &out.right();
    Ok(out)
}

/// Whether equality holds in the block inequality, decided from `E`: its row
/// and column spaces must sit on the support indices and `E` must be
/// Hermitian positive semidefinite, all within `tol`.
pub fn lemma2_equality_predicate(q: &BlockQuad, tol: f64) -> Result<bool> {
    let em = build_E(q)?;
    let pattern = em.support_pattern();
    Ok(matcore::range_contained(&em.e, &pattern, Orientation::Rows, tol)?
        && matcore::range_contained(&em.e, &pattern, Orientation::Columns, tol)?
        && matcore::is_hermitian_psd(&em.e, tol)?)
}

fn require_square(a: &Matrix) -> Result<()> {
    if !a.is_square() {
        return Err(Error::Shape(format!("expected a square matrix, got {:?}", a.shape())));
    }
    Ok(())
}

/// `||A||_* - sum_i |A_ii|`.
pub fn trace_bound_gap(a: &Matrix) -> Result<f64> {
    require_square(a)?;
    let diag: f64 = (0..a.rows()).map(|i| a.get(i, i).norm()).sum();
    Ok(matcore::nuclear_norm(a)? - diag)
}

/// `|| ||A||_* - Tr(A) || <= tol (1 + ||A||_*)` with the signed trace.
pub fn trace_equality_predicate(a: &Matrix, tol: f64) -> Result<bool> {
    require_square(a)?;
    let nuc = matcore::nuclear_norm(a)?;
    Ok((Complex64::new(nuc, 0.0) - a.trace()).norm() <= tol * (1.0 + nuc))
}

fn sorted_levels(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..2.0)).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// A quad for which the block inequality is tight, built by choosing a PSD
/// `E` on the support pattern and rotating by random unitaries.
///
/// The coupling `K = Lambda_A^{1/2} C Lambda_D^{1/2}` with `||C||_2 = 0.9`
/// keeps `[Lambda_A K; K^* Lambda_D]` positive semidefinite.
pub fn gen_equality_instance(field: Field, p: usize, q: usize, seed: u64) -> Result<BlockQuad> {
    if p == 0 || q == 0 {
        return Err(Error::Precondition(format!(
            "block sizes must be positive, got ({p}, {q})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (r_a, r_d) = loop {
        let pair = (rng.random_range(0..=p), rng.random_range(0..=q));
        if pair != (0, 0) {
            break pair;
        }
    };
    let la = sorted_levels(&mut rng, r_a);
    let ld = sorted_levels(&mut rng, r_d);
    let coupling = if r_a > 0 && r_d > 0 {
        random::with_spectral_norm(field, r_a, r_d, 0.9, &mut rng)
    } else {
        Matrix::zeros(field, r_a, r_d)
    };
    let k = Matrix::from_complex_matrix(nalgebra::DMatrix::from_fn(r_a, r_d, |i, j| {
        coupling.get(i, j) * (la[i].sqrt() * ld[j].sqrt())
    }))
    .promote(field)
    .realify(0.0);
    let core = Matrix::block2x2(
        &Matrix::diag_real(&la).promote(field),
        &k,
        &k.adjoint(),
        &Matrix::diag_real(&ld).promote(field),
    )?;

    let n = p + q;
    let support: Vec<usize> = (0..r_a).chain(p..p + r_d).collect();
    let mut e = nalgebra::DMatrix::zeros(n, n);
    for (a, &i) in support.iter().enumerate() {
        for (b, &j) in support.iter().enumerate() {
            e[(i, j)] = core.get(a, b);
        }
    }
    let e = Matrix::from_complex_matrix(e)
        .promote(field)
        .realify(0.0)
        .promote(field);
    let left = Matrix::block_diag(
        &random::unitary(field, p, &mut rng),
        &random::unitary(field, q, &mut rng),
    );
    let right = Matrix::block_diag(
        &random::unitary(field, p, &mut rng),
        &random::unitary(field, q, &mut rng),
    );
    let x = &(&left * &e) * &right.adjoint();
    BlockQuad::split(&x, p)
}

/// Outcome of one randomized suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub trials: usize,
    pub violations: Vec<Violation>,
    pub discarded_dead_zone: usize,
    pub seed: u64,
    pub max_gap_observed: f64,
    pub min_gap_observed: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub trial: usize,
    pub seed: u64,
    pub detail: String,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// One trial's result: its gap value and an optional violation message.
/// `None` gap marks a discarded trial.
struct TrialOutcome {
    gap: Option<f64>,
    violation: Option<String>,
}

fn collect(seed: u64, trials: usize, outcomes: Vec<TrialOutcome>) -> SuiteReport {
    let mut report = SuiteReport {
        trials,
        violations: Vec::new(),
        discarded_dead_zone: 0,
        seed,
        max_gap_observed: f64::NEG_INFINITY,
        min_gap_observed: f64::INFINITY,
    };
    let mut counted = 0;
    for (i, o) in outcomes.into_iter().enumerate() {
        match o.gap {
            None => report.discarded_dead_zone += 1,
            Some(g) if counted < trials => {
                counted += 1;
                report.max_gap_observed = report.max_gap_observed.max(g);
                report.min_gap_observed = report.min_gap_observed.min(g);
                if let Some(detail) = o.violation {
                    report.violations.push(Violation {
                        trial: i,
                        seed: seed.wrapping_add(i as u64),
                        detail,
                    });
                }
            }
            Some(_) => {}
        }
    }
    if counted == 0 {
        report.max_gap_observed = 0.0;
        report.min_gap_observed = 0.0;
    }
    report
}

/// Runs `trial(seed + i)` for enough indices to count `trials` non-discarded
/// outcomes, in deterministic order.
fn run_trials<F>(trials: usize, seed: u64, trial: F) -> Result<SuiteReport>
where
    F: Fn(u64) -> Result<TrialOutcome> + Sync,
{
    let mut outcomes = Vec::new();
    let mut kept = 0;
    let mut next = 0usize;
    while kept < trials {
        let batch = (trials - kept).max(16);
        let chunk: Vec<TrialOutcome> = (next..next + batch)
            .into_par_iter()
            .map(|i| trial(seed.wrapping_add(i as u64)))
            .collect::<Result<_>>()?;
        kept += chunk.iter().filter(|o| o.gap.is_some()).count();
        next += batch;
        outcomes.extend(chunk);
        if next > 50 * trials.max(1) {
            break;
        }
    }
    Ok(collect(seed, trials, outcomes))
}

fn random_field(rng: &mut ChaCha8Rng) -> Field {
    if rng.random::<bool>() {
        Field::Real
    } else {
        Field::Complex
    }
}

fn random_quad(rng: &mut ChaCha8Rng) -> Result<BlockQuad> {
    let field = random_field(rng);
    let p = rng.random_range(1..=5);
    let q = rng.random_range(1..=5);
    BlockQuad::split(&random::gaussian(field, p + q, p + q, rng), p)
}

pub const FORWARD_TOL: f64 = 1e-8;
pub const REVERSE_GAP: f64 = 1e-4;
pub const PREDICATE_TOL: f64 = 1e-8;

/// The block inequality on Gaussian quads with `p, q <= 5`.
pub fn lemma1_suite(trials: usize, seed: u64) -> Result<SuiteReport> {
    run_trials(trials, seed, |s| {
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let quad = random_quad(&mut rng)?;
        let gap = block_gap(&quad)?;
        Ok(TrialOutcome {
            gap: Some(gap),
            violation: (gap < -FORWARD_TOL).then(|| format!("negative gap {gap:e}")),
        })
    })
}

/// Constructed equality instances must be tight and satisfy the predicate.
pub fn lemma2_forward_suite(trials: usize, seed: u64) -> Result<SuiteReport> {
    run_trials(trials, seed, |s| {
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let field = random_field(&mut rng);
        let (p, q) = (rng.random_range(1..=4), rng.random_range(1..=4));
        let quad = gen_equality_instance(field, p, q, s)?;
        let gap = block_gap(&quad)?;
        let violation = if gap.abs() > FORWARD_TOL {
            Some(format!("equality instance has gap {gap:e}"))
        } else if !lemma2_equality_predicate(&quad, PREDICATE_TOL)? {
            Some("equality instance fails the predicate".into())
        } else {
            None
        };
        Ok(TrialOutcome {
            gap: Some(gap),
            violation,
        })
    })
}

/// Quads with a clear gap must fail the predicate. Half the trials perturb a
/// tight instance so the check also runs near the boundary; gaps strictly
/// between the two thresholds are discarded.
pub fn lemma2_reverse_suite(trials: usize, seed: u64) -> Result<SuiteReport> {
    run_trials(trials, seed, |s| {
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let quad = if rng.random::<bool>() {
            random_quad(&mut rng)?
        } else {
            let field = random_field(&mut rng);
            let (p, q) = (rng.random_range(1..=4), rng.random_range(1..=4));
            let base = gen_equality_instance(field, p, q, s)?;
            let scale = [1e-3, 1e-2, 1e-1][rng.random_range(0..3)];
            let noise = random::gaussian(field, p + q, p + q, &mut rng).scale(scale);
            BlockQuad::split(&(&base.assembled + &noise), p)?
        };
        let gap = block_gap(&quad)?;
        if gap > FORWARD_TOL && gap <= REVERSE_GAP {
            return Ok(TrialOutcome {
                gap: None,
                violation: None,
            });
        }
        let predicate = lemma2_equality_predicate(&quad, PREDICATE_TOL)?;
        let violation = if gap > REVERSE_GAP && predicate {
            Some(format!("gap {gap:e} but the predicate holds"))
        } else if gap <= FORWARD_TOL && !predicate {
            Some(format!("gap {gap:e} but the predicate fails"))
        } else {
            None
        };
        Ok(TrialOutcome {
            gap: Some(gap),
            violation,
        })
    })
}

/// `||A||_* >= sum |A_ii|` on Gaussian squares of size at most 5.
pub fn lemma3_suite(trials: usize, seed: u64) -> Result<SuiteReport> {
    run_trials(trials, seed, |s| {
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let field = random_field(&mut rng);
        let n = rng.random_range(1..=5);
        let a = random::gaussian(field, n, n, &mut rng);
        let gap = trace_bound_gap(&a)?;
        Ok(TrialOutcome {
            gap: Some(gap),
            violation: (gap < -1e-9).then(|| format!("negative trace gap {gap:e}")),
        })
    })
}

/// The trace equality predicate agrees with the PSD test: the first half of
/// the trials draw `R R^*`, the second half plain Gaussian matrices.
pub fn lemma3_biconditional_suite(psd_trials: usize, general_trials: usize, seed: u64) -> Result<SuiteReport> {
    let total = psd_trials + general_trials;
    let outcomes: Vec<TrialOutcome> = (0..total)
        .into_par_iter()
        .map(|i| {
            let s = seed.wrapping_add(i as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let field = random_field(&mut rng);
            let n = rng.random_range(1..=5);
            let a = if i < psd_trials {
                let k = rng.random_range(1..=n);
                let r = random::gaussian(field, n, k, &mut rng);
                &r * &r.adjoint()
            } else {
                random::gaussian(field, n, n, &mut rng)
            };
            let gap = trace_bound_gap(&a)?;
            let lhs = trace_equality_predicate(&a, PREDICATE_TOL)?;
            let rhs = matcore::is_hermitian_psd(&a, PREDICATE_TOL)?;
            let violation = (lhs != rhs).then(|| format!("trace equality {lhs} but PSD test {rhs}"));
            let violation = violation
                .or_else(|| (i < psd_trials && !rhs).then(|| "constructed R R^* not recognized as PSD".to_string()));
            Ok(TrialOutcome {
                gap: Some(gap),
                violation,
            })
        })
        .collect::<Result<_>>()?;
    Ok(collect(seed, total, outcomes))
}

/// `Re<dual_witness(M), M> = ||M||_*` and `Re<G, M> <= ||M||_*` for random
/// `G` with unit spectral norm.
pub fn dual_witness_suite(trials: usize, probes: usize, seed: u64) -> Result<SuiteReport> {
    run_trials(trials, seed, |s| {
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let field = random_field(&mut rng);
        let (m, n) = (rng.random_range(1..=5), rng.random_range(1..=5));
        let rank = rng.random_range(1..=m.min(n));
        let x = random::low_rank(field, m, n, rank, &mut rng);
        let nuc = matcore::nuclear_norm(&x)?;
        let w = matcore::dual_witness(&x)?;
        let attained = w.real_inner(&x);
        if (attained - nuc).abs() > 1e-9 * (1.0 + nuc) {
            return Ok(TrialOutcome {
                gap: Some(attained - nuc),
                violation: Some(format!("witness attains {attained} against nuclear norm {nuc}")),
            });
        }
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..probes {
            let g = random::with_spectral_norm(field, m, n, 1.0, &mut rng);
            worst = worst.max(g.real_inner(&x) - nuc);
        }
        Ok(TrialOutcome {
            gap: Some(worst),
            violation: (worst > 1e-9).then(|| format!("probe exceeds the nuclear norm by {worst:e}")),
        })
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaSuites {
    pub lemma1: SuiteReport,
    pub lemma2_forward: SuiteReport,
    pub lemma2_reverse: SuiteReport,
    pub lemma3: SuiteReport,
    pub lemma3_biconditional: SuiteReport,
    pub dual_witness: SuiteReport,
}

impl LemmaSuites {
    pub fn passed(&self) -> bool {
        [
            &self.lemma1,
            &self.lemma2_forward,
            &self.lemma2_reverse,
            &self.lemma3,
            &self.lemma3_biconditional,
            &self.dual_witness,
        ]
        .iter()
        .all(|r| r.passed())
    }
}

/// `trials` inequality trials, 500 trials for each biconditional direction,
/// and 100 dual-witness matrices with 100 probes each.
pub fn run_suites(trials: usize, seed: u64) -> Result<LemmaSuites> {
    Ok(LemmaSuites {
        lemma1: lemma1_suite(trials, seed)?,
        lemma2_forward: lemma2_forward_suite(500, seed)?,
        lemma2_reverse: lemma2_reverse_suite(500, seed)?,
        lemma3: lemma3_suite(trials, seed)?,
        lemma3_biconditional: lemma3_biconditional_suite(500, 500, seed)?,
        dual_witness: dual_witness_suite(100, 100, seed)?,
    })
}
