//! Numerical nuclear norm minimization `min ||Y||_* s.t. A(Y) = b`, used as an
//! independent cross-check of certificates.
//!
//! The default method is Douglas-Rachford splitting between singular value
//! thresholding and the Euclidean projection onto the affine feasible set.
//! A subgradient method over null-space coordinates is available as a
//! second, independent solver.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{self, random, Matrix};
use crate::operator::{self, MeasurementOperator, Measurements, NullSpaceBasis};

/// Proximal map of `tau ||.||_*`: soft-thresholds the singular values.
pub fn svt(m: &Matrix, tau: f64) -> Result<Matrix> {
    if tau.is_nan() || tau < 0.0 {
        return Err(Error::Precondition(format!(
            "threshold tau = {tau} must be nonnegative"
        )));
    }
    let f = matcore::svd(m)?;
    let (rows, cols) = m.shape();
    let shrunk: Vec<f64> = f.sigma.iter().map(|s| (s - tau).max(0.0)).collect();
    let k = shrunk.iter().take_while(|&&s| s > 0.0).count();
    if k == 0 {
        return Ok(Matrix::zeros(m.field(), rows, cols));
    }
    let s = matcore::diagonal_block(&shrunk[..k], k, k);
    Ok(&(&f.u_leading(k) * &s) * &f.v_leading(k).adjoint())
}

/// Euclidean projection onto `{Y : A(Y) = b}` in real coordinates:
/// `P(y) = y0 + (I - R R^T) y` with `R` an orthonormal basis of the row space
/// of the real system and `y0` the least-norm solution.
#[derive(Clone, Debug)]
pub struct AffineProjector {
    op: MeasurementOperator,
    rows: DMatrix<f64>,
    base: DVector<f64>,
    residual: f64,
}

impl AffineProjector {
    pub fn new(op: &MeasurementOperator, b: &Measurements) -> Result<AffineProjector> {
        if b.field != op.field() {
            return Err(Error::FieldMismatch(format!(
                "measurements are {}, operator is {}",
                b.field,
                op.field()
            )));
        }
        if b.values.len() != op.len() {
            return Err(Error::Shape(format!(
                "{} measurements for an operator with {} rows",
                b.values.len(),
                op.len()
            )));
        }
        let dim = op.real_dimension();
        let system = op.real_system();
        let rhs = DVector::from_vec(b.to_real_coords());
        let (rows, base) = if system.nrows() == 0 {
            (DMatrix::zeros(dim, 0), DVector::zeros(dim))
        } else {
            let f = matcore::svd(&Matrix::from_real_matrix(&system))?;
            let r = f.rank();
            let u = f.u_leading(r).to_real();
            let v = f.v_leading(r).to_real();
            let inv = DVector::from_iterator(r, f.sigma[..r].iter().map(|s| 1.0 / s));
            let coeffs = (u.transpose() * &rhs).component_mul(&inv);
            (v.clone(), v * coeffs)
        };
        let residual = if system.nrows() == 0 {
            0.0
        } else {
            (&system * &base - &rhs).norm()
        };
        let norm_b = b.norm();
        if residual > 1e-8 * (1.0 + norm_b) {
            return Err(Error::Infeasible { residual });
        }
        Ok(AffineProjector {
            op: op.clone(),
            rows,
            base,
            residual,
        })
    }

    /// The least-norm feasible point.
    pub fn base_point(&self) -> Matrix {
        operator::from_real_coords(self.op.field(), self.op.shape(), self.base.as_slice())
    }

    /// Least-squares residual of the base point.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    fn project_coords(&self, y: &DVector<f64>) -> DVector<f64> {
        let along = &self.rows * (self.rows.transpose() * y);
        &self.base + y - along
    }

    pub fn project(&self, y: &Matrix) -> Result<Matrix> {
        self.op.check_input(y)?;
        let coords = DVector::from_vec(operator::to_real_coords(y));
        let z = self.project_coords(&coords);
        Ok(operator::from_real_coords(
            self.op.field(),
            self.op.shape(),
            z.as_slice(),
        ))
    }
}

pub fn project_affine(op: &MeasurementOperator, b: &Measurements, y: &Matrix) -> Result<Matrix> {
    AffineProjector::new(op, b)?.project(y)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Splitting,
    Subgradient,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub method: Method,
    pub max_iter: usize,
    /// Absolute feasibility tolerance; `None` means `1e-9 (1 + ||b||)`.
    pub tol_feas: Option<f64>,
    pub tol_obj: f64,
    pub restarts: usize,
    pub seed: u64,
    /// Threshold of the splitting prox step; `None` scales with the base point.
    pub gamma: Option<f64>,
    pub relaxation: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            method: Method::Splitting,
            max_iter: 20_000,
            tol_feas: None,
            tol_obj: 1e-8,
            restarts: 4,
            seed: 0,
            gamma: None,
            relaxation: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverResult {
    #[serde(rename = "Y")]
    pub y: Matrix,
    pub objective: f64,
    pub feasibility_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Best-so-far objective after each iteration of the winning restart.
    pub history: Vec<f64>,
    pub restart: usize,
    pub restart_objectives: Vec<f64>,
    pub options: SolverOptions,
}

fn feasibility_residual(op: &MeasurementOperator, b: &Measurements, y: &Matrix) -> Result<f64> {
    let got = operator::apply(op, y)?;
    Ok(got
        .values
        .iter()
        .zip(&b.values)
        .map(|(g, w)| (g - w).norm_sqr())
        .sum::<f64>()
        .sqrt())
}

/// Tracks the best feasible iterate and the stopping rule.
struct Tracker {
    best: Option<(f64, Matrix)>,
    history: Vec<f64>,
    recent: Vec<f64>,
    tol_obj: f64,
}

impl Tracker {
    fn new(tol_obj: f64) -> Tracker {
        Tracker {
            best: None,
            history: Vec::new(),
            recent: Vec::new(),
            tol_obj,
        }
    }

    fn record(&mut self, objective: f64, y: &Matrix) {
        if self.best.as_ref().is_none_or(|(b, _)| objective < *b) {
            self.best = Some((objective, y.clone()));
        }
        self.history.push(self.best.as_ref().map_or(objective, |b| b.0));
        self.recent.push(objective);
        if self.recent.len() > 11 {
            self.recent.remove(0);
        }
    }

    /// Relative objective change over the last 10 iterations is within `tol_obj`.
    fn objective_settled(&self) -> bool {
        if self.recent.len() < 11 {
            return false;
        }
        let hi = self.recent.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = self.recent.iter().copied().fold(f64::INFINITY, f64::min);
        hi - lo <= self.tol_obj * (1.0 + lo.abs())
    }
}

struct RunOutcome {
    y: Matrix,
    objective: f64,
    iterations: usize,
    converged: bool,
    history: Vec<f64>,
}

fn splitting_run(
    proj: &AffineProjector,
    start: Matrix,
    gamma: f64,
    opts: &SolverOptions,
    tol_feas: f64,
) -> Result<RunOutcome> {
    let mut z = start;
    let mut tracker = Tracker::new(opts.tol_obj);
    let mut converged = false;
    let mut iterations = 0;
    for k in 0..opts.max_iter {
        iterations = k + 1;
        let x = svt(&z, gamma)?;
        let reflected = &x.scale(2.0) - &z;
        let y = proj.project(&reflected)?;
        let step = &y - &x;
        z = &z + &step.scale(opts.relaxation);
        let objective = matcore::nuclear_norm(&y)?;
        tracker.record(objective, &y);
        if step.frobenius_norm() <= tol_feas && tracker.objective_settled() {
            converged = true;
            break;
        }
    }
    let (objective, y) = tracker.best.expect("at least one iteration");
    Ok(RunOutcome {
        y,
        objective,
        iterations,
        converged,
        history: tracker.history,
    })
}

fn subgradient_run(
    proj: &AffineProjector,
    basis: &NullSpaceBasis,
    start: Matrix,
    opts: &SolverOptions,
) -> Result<RunOutcome> {
    let base = proj.project(&start)?;
    let scale = base.frobenius_norm().max(1e-12);
    let mut coeffs = vec![0.0; basis.dimension()];
    let mut tracker = Tracker::new(opts.tol_obj);
    let mut converged = false;
    let mut iterations = 0;
    for k in 0..opts.max_iter.max(1) {
        iterations = k + 1;
        let y = &base + &basis.combine(&coeffs);
        let objective = matcore::nuclear_norm(&y)?;
        tracker.record(objective, &y);
        if basis.dimension() == 0 || tracker.objective_settled() {
            converged = true;
            break;
        }
        let g = match matcore::dual_witness(&y) {
            Ok(w) => basis.coordinates(&w),
            Err(Error::Degenerate(_)) => {
                converged = true;
                break;
            }
            Err(e) => return Err(e),
        };
        let gn = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if gn <= 1e-15 {
            converged = true;
            break;
        }
        let tau = scale / ((k + 1) as f64).sqrt();
        for (c, gi) in coeffs.iter_mut().zip(&g) {
            *c -= tau * gi / gn;
        }
    }
    let (objective, y) = tracker.best.expect("at least one iteration");
    Ok(RunOutcome {
        y,
        objective,
        iterations,
        converged,
        history: tracker.history,
    })
}

/// Minimizes `||Y||_*` over `A(Y) = b`.
///
/// Restart 0 starts from the least-norm feasible point; later restarts add a
/// seeded Gaussian perturbation of the same scale. Restarts run in parallel
/// and the lowest objective wins, ties going to the lower restart index.
pub fn solve_nnm(op: &MeasurementOperator, b: &Measurements, opts: &SolverOptions) -> Result<SolverResult> {
    let proj = AffineProjector::new(op, b)?;
    let tol_feas = opts.tol_feas.unwrap_or(1e-9 * (1.0 + b.norm()));
    let base = proj.base_point();
    let scale = base.frobenius_norm();
    let gamma = opts.gamma.unwrap_or(if scale > 0.0 { 0.5 * scale } else { 1.0 });
    let basis = match opts.method {
        Method::Subgradient => Some(operator::null_space_basis(op)?),
        Method::Splitting => None,
    };
    let (rows, cols) = op.shape();
    let restarts = opts.restarts.max(1);
    let runs: Vec<RunOutcome> = (0..restarts)
        .into_par_iter()
        .map(|i| {
            let start = if i == 0 {
                base.clone()
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(i as u64));
                let g = random::gaussian(op.field(), rows, cols, &mut rng);
                let size = g.frobenius_norm().max(1e-300);
                &base + &g.scale(scale.max(1.0) / size)
            };
            match &basis {
                None => splitting_run(&proj, start, gamma, opts, tol_feas),
                Some(basis) => subgradient_run(&proj, basis, start, opts),
            }
        })
        .collect::<Result<_>>()?;

    let restart_objectives: Vec<f64> = runs.iter().map(|r| r.objective).collect();
    let (winner, _) = restart_objectives
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0)))
        .expect("at least one restart");
    let run = runs.into_iter().nth(winner).expect("winner index is valid");
    let feasibility_residual = feasibility_residual(op, b, &run.y)?;
    Ok(SolverResult {
        converged: run.converged && feasibility_residual <= tol_feas,
        y: run.y,
        objective: run.objective,
        feasibility_residual,
        iterations: run.iterations,
        history: run.history,
        restart: winner,
        restart_objectives,
        options: opts.clone(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeFlag {
    Flat,
    Descent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeEntry {
    pub direction: usize,
    pub t: f64,
    pub delta: f64,
    pub flag: Option<ProbeFlag>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub base_norm: f64,
    pub tolerance: f64,
    pub entries: Vec<ProbeEntry>,
    pub flat: usize,
    pub descent: usize,
}

impl ProbeReport {
    pub fn any_flag(&self) -> bool {
        self.flat + self.descent > 0
    }
}

/// `+-{0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1}`.
pub fn default_probe_grid() -> Vec<f64> {
    let pos = [0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0];
    pos.iter().map(|t| -t).rev().chain(pos.iter().copied()).collect()
}

/// Records `||Y + tN||_* - ||Y||_*` along every direction and step. A change
/// within `1e-8 (1 + ||Y||_*)` is flagged flat, anything below that descent.
pub fn probe_directions(ystar: &Matrix, directions: &[Matrix], grid: &[f64]) -> Result<ProbeReport> {
    let base_norm = matcore::nuclear_norm(ystar)?;
    let tolerance = 1e-8 * (1.0 + base_norm);
    let mut entries = Vec::with_capacity(directions.len() * grid.len());
    for (i, n) in directions.iter().enumerate() {
        if n.shape() != ystar.shape() {
            return Err(Error::Shape(format!(
                "probe direction {i} is {:?}, point is {:?}",
                n.shape(),
                ystar.shape()
            )));
        }
        for &t in grid {
            let delta = matcore::nuclear_norm(&(ystar + &n.scale(t)))? - base_norm;
            let flag = if delta < -tolerance {
                Some(ProbeFlag::Descent)
            } else if delta.abs() <= tolerance {
                Some(ProbeFlag::Flat)
            } else {
                None
            };
            entries.push(ProbeEntry {
                direction: i,
                t,
                delta,
                flag,
            });
        }
    }
    let count = |f| entries.iter().filter(|e| e.flag == Some(f)).count();
    Ok(ProbeReport {
        base_norm,
        tolerance,
        flat: count(ProbeFlag::Flat),
        descent: count(ProbeFlag::Descent),
        entries,
    })
}

pub fn uniqueness_probe(ystar: &Matrix, basis: &NullSpaceBasis, grid: &[f64]) -> Result<ProbeReport> {
    probe_directions(ystar, &basis.directions, grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::Field;
    use crate::operator::{apply, gaussian_operator, null_space_basis, operator_with_null_span};
    use proptest::prelude::*;

    fn ones() -> Matrix {
        Matrix::filled_real(2, 2, 1.0)
    }

    #[test]
    fn svt_examples() {
        let out = svt(&Matrix::diag_real(&[3.0, 1.0]), 2.0).unwrap();
        assert!(out.approx_eq(&Matrix::diag_real(&[1.0, 0.0]), 1e-12));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = random::gaussian(Field::Complex, 3, 4, &mut rng);
        assert!(svt(&m, 0.0).unwrap().approx_eq(&m, 1e-9));
        let s1 = matcore::spectral_norm(&m).unwrap();
        assert!(svt(&m, s1).unwrap().frobenius_norm() < 1e-12);
        assert!(svt(&m, -1.0).is_err());
    }

    #[test]
    fn projection_examples() {
        let op = operator_with_null_span(&[ones()]).unwrap();
        let x = Matrix::diag_real(&[-1.0, 0.0]);
        let b = apply(&op, &x).unwrap();
        let proj = AffineProjector::new(&op, &b).unwrap();
        assert!(proj.project(&x).unwrap().approx_eq(&x, 1e-10));
        let y = &x + &ones().scale(0.7);
        assert!(proj.project(&y).unwrap().approx_eq(&y, 1e-10));
    }

    #[test]
    fn projection_matches_normal_equations() {
        let op = gaussian_operator((3, 3), 5, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random::gaussian(Field::Real, 3, 3, &mut rng);
        let b = apply(&op, &x).unwrap();
        let y = random::gaussian(Field::Real, 3, 3, &mut rng);
        let z = project_affine(&op, &b, &y).unwrap();
        // Oracle: z = y - A^T (A A^T)^{-1} (A y - b).
        let a = op.real_system();
        let yv = DVector::from_vec(operator::to_real_coords(&y));
        let bv = DVector::from_vec(b.to_real_coords());
        let lam = (&a * a.transpose()).lu().solve(&(&a * &yv - &bv)).unwrap();
        let oracle = &yv - a.transpose() * lam;
        let zv = DVector::from_vec(operator::to_real_coords(&z));
        assert!((&zv - &oracle).norm() < 1e-9);
        let resid = feasibility_residual(&op, &b, &z).unwrap();
        assert!(resid <= 1e-9 * (1.0 + b.norm()));
    }

    #[test]
    fn infeasible_measurements() {
        // Two identical rows with inconsistent right-hand sides.
        let a = Matrix::real(1, 2, &[1.0, 0.0]).unwrap();
        let op = MeasurementOperator::new((1, 2), Field::Real, vec![a.clone(), a]).unwrap();
        let b = Measurements {
            field: Field::Real,
            values: vec![1.0.into(), 2.0.into()],
        };
        assert!(matches!(AffineProjector::new(&op, &b), Err(Error::Infeasible { .. })));
        assert!(matches!(
            solve_nnm(&op, &b, &SolverOptions::default()),
            Err(Error::Infeasible { .. })
        ));
    }

    #[test]
    fn solves_counterexample() {
        let op = operator_with_null_span(&[ones()]).unwrap();
        let x = Matrix::diag_real(&[-1.0, 0.0]);
        let b = apply(&op, &x).unwrap();
        let res = solve_nnm(&op, &b, &SolverOptions::default()).unwrap();
        assert!(res.converged, "{res:?}");
        assert!((res.objective - 1.0).abs() < 1e-6);
        assert!(res.y.approx_eq(&x, 1e-5));
    }

    #[test]
    fn solves_flat_segment() {
        let op = operator_with_null_span(&[Matrix::diag_real(&[-1.0, 1.0])]).unwrap();
        let b = apply(&op, &Matrix::diag_real(&[1.0, 0.0])).unwrap();
        let res = solve_nnm(&op, &b, &SolverOptions::default()).unwrap();
        assert!((res.objective - 1.0).abs() < 1e-6);
        let t = res.y.re(1, 1);
        assert!((-1e-6..=1.0 + 1e-6).contains(&t));
        let on_segment = Matrix::diag_real(&[1.0 - t, t]);
        assert!(res.y.approx_eq(&on_segment, 1e-6));
    }

    #[test]
    fn zero_measurements_give_zero() {
        let op = gaussian_operator((3, 3), 4, 2).unwrap();
        let b = apply(&op, &Matrix::zeros(Field::Real, 3, 3)).unwrap();
        let res = solve_nnm(&op, &b, &SolverOptions::default()).unwrap();
        assert!(res.y.frobenius_norm() < 1e-9);
    }

    #[test]
    fn recovers_low_rank_from_many_measurements() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random::low_rank(Field::Real, 4, 4, 1, &mut rng);
        let op = gaussian_operator((4, 4), 14, 7).unwrap();
        let b = apply(&op, &x).unwrap();
        let res = solve_nnm(&op, &b, &SolverOptions::default()).unwrap();
        assert!(
            (&res.y - &x).frobenius_norm() <= 1e-4 * (1.0 + x.frobenius_norm()),
            "{res:?}"
        );
    }

    #[test]
    fn subgradient_method_agrees() {
        let op = operator_with_null_span(&[ones()]).unwrap();
        let x = Matrix::diag_real(&[-1.0, 0.0]);
        let b = apply(&op, &x).unwrap();
        let opts = SolverOptions {
            method: Method::Subgradient,
            max_iter: 5000,
            restarts: 1,
            ..SolverOptions::default()
        };
        let res = solve_nnm(&op, &b, &opts).unwrap();
        assert!((res.objective - 1.0).abs() < 1e-2, "{}", res.objective);
        assert!(res.feasibility_residual < 1e-9);
    }

    #[test]
    fn solver_is_deterministic_and_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = random::low_rank(Field::Real, 3, 3, 1, &mut rng);
        let op = gaussian_operator((3, 3), 6, 1).unwrap();
        let b = apply(&op, &x).unwrap();
        let opts = SolverOptions {
            max_iter: 500,
            ..SolverOptions::default()
        };
        let a = solve_nnm(&op, &b, &opts).unwrap();
        let c = solve_nnm(&op, &b, &opts).unwrap();
        assert_eq!(a, c);
        assert!(a.history.windows(2).all(|w| w[1] <= w[0]));
        let lowest = a.restart_objectives.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(a.objective, lowest);
    }

    #[test]
    fn options_json() {
        let opts: SolverOptions = serde_json::from_str(
            r#"{"method":"subgradient","max_iter":10,"tol_feas":1e-6,"tol_obj":1e-5,"restarts":2,"seed":3}"#,
        )
        .unwrap();
        assert_eq!(opts.method, Method::Subgradient);
        assert_eq!(opts.restarts, 2);
        assert!(serde_json::from_str::<SolverOptions>(r#"{"bogus":1}"#).is_err());
    }

    #[test]
    fn probe_examples() {
        let op = operator_with_null_span(&[ones()]).unwrap();
        let basis = null_space_basis(&op).unwrap();
        let x = Matrix::diag_real(&[-1.0, 0.0]);
        let r = uniqueness_probe(&x, &basis, &default_probe_grid()).unwrap();
        assert!(!r.any_flag(), "{r:?}");

        let op = operator_with_null_span(&[Matrix::diag_real(&[-1.0, 1.0])]).unwrap();
        let basis = null_space_basis(&op).unwrap();
        let y = Matrix::diag_real(&[1.0, 0.0]);
        let r = uniqueness_probe(&y, &basis, &default_probe_grid()).unwrap();
        // The basis vector is +-diag(-1,1)/sqrt(2); flat steps are the ones
        // moving toward diag(0,1).
        let sign = basis.directions[0].re(1, 1).signum();
        for e in &r.entries {
            let toward = e.t * sign > 0.0;
            assert_eq!(e.flag == Some(ProbeFlag::Flat), toward, "{e:?}");
        }
        assert_eq!(r.descent, 0);

        let empty = NullSpaceBasis {
            shape: (2, 2),
            field: Field::Real,
            directions: vec![],
        };
        assert!(uniqueness_probe(&y, &empty, &default_probe_grid())
            .unwrap()
            .entries
            .is_empty());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn svt_is_the_proximal_map(seed in 0u64..10_000, tau in 0.0f64..3.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random::gaussian(Field::Complex, 3, 3, &mut rng);
            let p = svt(&m, tau).unwrap();
            let cost = |z: &Matrix| tau * matcore::nuclear_norm(z).unwrap() + 0.5 * (z - &m).frobenius_norm().powi(2);
            let at_p = cost(&p);
            prop_assert!(matcore::nuclear_norm(&p).unwrap() <= matcore::nuclear_norm(&m).unwrap() + 1e-12);
            for _ in 0..50 {
                let z = &p + &random::gaussian(Field::Complex, 3, 3, &mut rng).scale(0.3);
                prop_assert!(at_p <= cost(&z) + 1e-8);
            }
        }
    }
}
