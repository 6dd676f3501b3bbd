//! The two-by-two instance `X = diag(-1, 0)` with null space spanned by the
//! all-ones matrix: recovery holds although the strict weak condition fails.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certify::{
    certify_recovery, direction_verdict, prepare_ground_truth, CertifyOptions, RecoveryCertificate, VerdictCase,
};
use crate::error::{Error, Result};
use crate::matcore::{nuclear_norm, Complex64, Field, Matrix};
use crate::operator::{null_space_basis, operator_with_null_span, MeasurementOperator};

/// Angular resolution of the exhaustive check in complex mode.
pub const THETA_RESOLUTION: f64 = PI / 512.0;

const MAX_GRID_POINTS: usize = 10_000_000;

/// `diag(-1, 0)`.
pub fn truth() -> Matrix {
    Matrix::diag_real(&[-1.0, 0.0])
}

/// The all-ones 2x2 matrix.
pub fn direction() -> Matrix {
    Matrix::filled_real(2, 2, 1.0)
}

/// Ground truth and an operator whose null space is spanned by the all-ones
/// matrix over `field`.
pub fn problem(field: Field) -> Result<(Matrix, MeasurementOperator)> {
    let x = truth().promote(field);
    let op = operator_with_null_span(&[direction().promote(field)])?;
    Ok((x, op))
}

/// `||X + tQ||_*` for real `t`.
pub fn closed_form_real(t: f64) -> f64 {
    if t >= 0.0 {
        (4.0 * t * t + 1.0).sqrt()
    } else {
        1.0 - 2.0 * t
    }
}

/// `||X + tQ||_*` at `t = -a e^{-i theta}`.
pub fn closed_form_complex(a: f64, theta: f64) -> Result<f64> {
    if a < 0.0 || a.is_nan() {
        return Err(Error::Precondition(format!("modulus a = {a} must be nonnegative")));
    }
    Ok((4.0 * a * a + 2.0 * a * (1.0 + theta.cos()) + 1.0).sqrt())
}

/// A sampling grid; the variant fixes the field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "field", rename_all = "lowercase", deny_unknown_fields)]
pub enum GridSpec {
    /// `t` from `t_min` to `t_max` inclusive.
    Real { t_min: f64, t_max: f64, step: f64 },
    /// `a` from 0 to `a_max` inclusive, `theta` over `[0, 2 pi)`.
    Complex { a_max: f64, a_step: f64, theta_step: f64 },
}

impl GridSpec {
    pub fn real_default() -> GridSpec {
        GridSpec::Real {
            t_min: -2.0,
            t_max: 2.0,
            step: 0.01,
        }
    }

    pub fn complex_default() -> GridSpec {
        GridSpec::Complex {
            a_max: 2.0,
            a_step: 0.05,
            theta_step: PI / 16.0,
        }
    }

    pub fn field(&self) -> Field {
        match self {
            GridSpec::Real { .. } => Field::Real,
            GridSpec::Complex { .. } => Field::Complex,
        }
    }

    /// Grid points in index order. `param2` is `None` in real mode.
    pub fn points(&self) -> Result<Vec<(f64, Option<f64>)>> {
        match *self {
            GridSpec::Real { t_min, t_max, step } => {
                let ts = inclusive_range(t_min, t_max, step)?;
                Ok(ts.into_iter().map(|t| (t, None)).collect())
            }
            GridSpec::Complex {
                a_max,
                a_step,
                theta_step,
            } => {
                let r#as = inclusive_range(0.0, a_max, a_step)?;
                check_step(theta_step)?;
                let n_theta = ((2.0 * PI / theta_step) - 1e-9).ceil().max(1.0) as usize;
                if r#as.len().saturating_mul(n_theta) > MAX_GRID_POINTS {
                    return Err(Error::Precondition("grid has too many points".into()));
                }
                Ok(r#as
                    .iter()
                    .flat_map(|&a| (0..n_theta).map(move |k| (a, Some(k as f64 * theta_step))))
                    .collect())
            }
        }
    }
}

fn check_step(step: f64) -> Result<()> {
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::Precondition(format!(
            "grid step {step} must be positive and finite"
        )));
    }
    Ok(())
}

fn inclusive_range(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    check_step(step)?;
    if !(lo.is_finite() && hi.is_finite()) || hi < lo {
        return Err(Error::Precondition(format!(
            "grid range [{lo}, {hi}] is empty or not finite"
        )));
    }
    let span = (hi - lo) / step;
    if span > MAX_GRID_POINTS as f64 {
        return Err(Error::Precondition("grid has too many points".into()));
    }
    let count = (span + 1e-9).floor() as usize + 1;
    Ok((0..count)
        .map(|k| {
            let v = lo + k as f64 * step;
            if v.abs() < 1e-9 * step {
                0.0
            } else {
                v
            }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveSample {
    pub param1: f64,
    pub param2: Option<f64>,
    pub numeric: f64,
    pub closed_form: f64,
    pub abs_err: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveSummary {
    pub max_abs_err: f64,
    pub min_value: f64,
    /// `[t]` in real mode, `[a, theta]` in complex mode.
    pub argmin: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurveTable {
    pub grid: GridSpec,
    pub samples: Vec<CurveSample>,
    pub summary: CurveSummary,
}

impl CurveTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("param1,param2,numeric,closed_form,abs_err\n");
        for s in &self.samples {
            let p2 = s.param2.map(|v| format!("{v:.16e}")).unwrap_or_default();
            let _ = writeln!(
                out,
                "{:.16e},{},{:.16e},{:.16e},{:.16e}",
                s.param1, p2, s.numeric, s.closed_form, s.abs_err
            );
        }
        out
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary).expect("summary serializes")
    }

    /// Writes the CSV to `path` and the summary next to it as `<stem>.summary.json`.
    /// Returns the summary path.
    pub fn write(&self, path: &Path) -> Result<std::path::PathBuf> {
        std::fs::write(path, self.to_csv())?;
        let summary = summary_path(path);
        std::fs::write(&summary, self.summary_json() + "\n")?;
        Ok(summary)
    }
}

pub fn summary_path(csv: &Path) -> std::path::PathBuf {
    let stem = csv.file_stem().and_then(|s| s.to_str()).unwrap_or("curve");
    csv.with_file_name(format!("{stem}.summary.json"))
}

fn sample(x: &Matrix, q: &Matrix, param1: f64, param2: Option<f64>) -> Result<CurveSample> {
    let (t, closed) = match param2 {
        None => (Complex64::new(param1, 0.0), closed_form_real(param1)),
        Some(theta) => (
            -Complex64::from_polar(param1, -theta),
            closed_form_complex(param1, theta)?,
        ),
    };
    let numeric = nuclear_norm(&(x + &q.scale_complex(t)))?;
    Ok(CurveSample {
        param1,
        param2,
        numeric,
        closed_form: closed,
        abs_err: (numeric - closed).abs(),
    })
}

/// Samples `||X + tQ||_*` numerically and in closed form over `grid`.
pub fn run_counterexample(grid: &GridSpec) -> Result<CurveTable> {
    let field = grid.field();
    let x = truth().promote(field);
    let q = direction().promote(field);
    let samples: Vec<CurveSample> = grid
        .points()?
        .into_par_iter()
        .map(|(p1, p2)| sample(&x, &q, p1, p2))
        .collect::<Result<_>>()?;

    let max_abs_err = samples.iter().map(|s| s.abs_err).fold(0.0, f64::max);
    let best = samples
        .iter()
        .min_by(|a, b| a.numeric.total_cmp(&b.numeric))
        .expect("grid is nonempty");
    let argmin = std::iter::once(best.param1).chain(best.param2).collect();
    let summary = CurveSummary {
        max_abs_err,
        min_value: best.numeric,
        argmin,
    };
    Ok(CurveTable {
        grid: *grid,
        samples,
        summary,
    })
}

/// Certificate for the counterexample over `field`. In complex mode the null
/// space is the real span of `{Q, iQ}` and the result carries an angular sweep.
pub fn certify_counterexample(field: Field, opts: &CertifyOptions) -> Result<RecoveryCertificate> {
    let (x, op) = problem(field)?;
    let gt = prepare_ground_truth(&x)?;
    let basis = null_space_basis(&op)?;
    let mut cert = certify_recovery(&gt, &basis, opts)?;
    if field == Field::Complex {
        let sweep = angular_check(THETA_RESOLUTION, opts.band)?;
        cert.notes.push(sweep.note());
    }
    Ok(cert)
}

/// Verdicts of the unit directions `e^{i theta} Q`, `theta = k * resolution`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngularCheck {
    pub resolution: f64,
    pub points: usize,
    pub min_phi: f64,
    pub zero_with_escape: usize,
    pub failures: Vec<f64>,
}

impl AngularCheck {
    pub fn verified(&self) -> bool {
        self.failures.is_empty()
    }

    fn note(&self) -> String {
        if self.verified() {
            format!(
                "grid-verified: {} angles at resolution pi/{:.0}, min phi {:e}, {} zero-valued with escape",
                self.points,
                PI / self.resolution,
                self.min_phi,
                self.zero_with_escape
            )
        } else {
            format!("grid check failed at {} of {} angles", self.failures.len(), self.points)
        }
    }
}

pub fn angular_check(resolution: f64, band: Option<f64>) -> Result<AngularCheck> {
    check_step(resolution)?;
    let gt = prepare_ground_truth(&truth().to_complex())?;
    let q = direction().to_complex();
    let n = ((2.0 * PI / resolution) - 1e-9).ceil().max(1.0) as usize;
    let verdicts: Vec<(f64, f64, VerdictCase)> = (0..n)
        .into_par_iter()
        .map(|k| {
            let theta = k as f64 * resolution;
            let v = direction_verdict(&gt, &q.scale_complex(Complex64::from_polar(1.0, theta)), band)?;
            Ok((theta, v.phi, v.case))
        })
        .collect::<Result<_>>()?;
    let mut check = AngularCheck {
        resolution,
        points: n,
        min_phi: f64::INFINITY,
        zero_with_escape: 0,
        failures: Vec::new(),
    };
    for (theta, phi, case) in verdicts {
        check.min_phi = check.min_phi.min(phi);
        match case {
            VerdictCase::StrictlyPositive => {}
            VerdictCase::ZeroWithEscape => check.zero_with_escape += 1,
            VerdictCase::ZeroNoEscape | VerdictCase::Negative => check.failures.push(theta),
        }
    }
    Ok(check)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certify::{oymak_value, Mode, Status};
    use proptest::prelude::*;

    #[test]
    fn closed_form_values() {
        assert_eq!(closed_form_real(0.0), 1.0);
        assert!((closed_form_real(1.0) - 5f64.sqrt()).abs() < 1e-15);
        assert_eq!(closed_form_real(-1.0), 3.0);
        assert_eq!(closed_form_complex(0.0, 1.234).unwrap(), 1.0);
        assert!((closed_form_complex(1.0, PI).unwrap() - 5f64.sqrt()).abs() < 1e-12);
        assert!((closed_form_complex(1.0, 0.0).unwrap() - 3.0).abs() < 1e-15);
        assert!(matches!(closed_form_complex(-0.1, 0.0), Err(Error::Precondition(_))));
    }

    #[test]
    fn real_curve() {
        let table = run_counterexample(&GridSpec::real_default()).unwrap();
        assert_eq!(table.samples.len(), 401);
        assert!(table.summary.max_abs_err <= 1e-9);
        assert!((table.summary.min_value - 1.0).abs() <= 1e-12);
        assert_eq!(table.summary.argmin, vec![0.0]);
        for s in &table.samples {
            assert!(s.numeric >= 1.0 - 1e-10);
            if s.param1.abs() >= 0.01 - 1e-12 {
                assert!(s.numeric > 1.0 + 1e-6, "t = {}", s.param1);
            }
        }
    }

    #[test]
    fn complex_curve() {
        let table = run_counterexample(&GridSpec::complex_default()).unwrap();
        assert_eq!(table.samples.len(), 41 * 32);
        assert!(table.summary.max_abs_err <= 1e-9);
        assert!((table.summary.min_value - 1.0).abs() <= 1e-12);
        assert_eq!(table.summary.argmin[0], 0.0);
    }

    #[test]
    fn degenerate_grid() {
        let table = run_counterexample(&GridSpec::Real {
            t_min: 0.0,
            t_max: 0.0,
            step: 0.01,
        })
        .unwrap();
        assert_eq!(table.samples.len(), 1);
        let s = table.samples[0];
        assert!((s.numeric - 1.0).abs() < 1e-14);
        assert_eq!(s.closed_form, 1.0);
    }

    #[test]
    fn invalid_grids() {
        for g in [
            GridSpec::Real {
                t_min: 1.0,
                t_max: 0.0,
                step: 0.1,
            },
            GridSpec::Real {
                t_min: 0.0,
                t_max: 1.0,
                step: 0.0,
            },
            GridSpec::Complex {
                a_max: 1.0,
                a_step: 0.1,
                theta_step: -1.0,
            },
        ] {
            assert!(matches!(run_counterexample(&g), Err(Error::Precondition(_))));
        }
    }

    #[test]
    fn csv_layout() {
        let table = run_counterexample(&GridSpec::Real {
            t_min: -0.01,
            t_max: 0.01,
            step: 0.01,
        })
        .unwrap();
        let csv = table.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "param1,param2,numeric,closed_form,abs_err");
        assert_eq!(lines.len(), 4);
        assert!(lines[2].starts_with("0.0000000000000000e0,,"));
        let json: serde_json::Value = serde_json::from_str(&table.summary_json()).unwrap();
        let keys: Vec<&String> = json.as_object().unwrap().keys().collect();
        assert_eq!(keys, ["argmin", "max_abs_err", "min_value"]);
    }

    #[test]
    fn real_certification() {
        let cert = certify_counterexample(Field::Real, &CertifyOptions::default()).unwrap();
        assert_eq!(cert.status, Status::Unique);
        assert_eq!(cert.mode, Mode::Exact);
        let gt = prepare_ground_truth(&truth()).unwrap();
        assert!(oymak_value(&gt, &direction()).unwrap().abs() <= 1e-9);
    }

    #[test]
    fn complex_certification() {
        let cert = certify_counterexample(Field::Complex, &CertifyOptions::default()).unwrap();
        assert_eq!(cert.status, Status::Unique);
        assert_eq!(cert.mode, Mode::Heuristic);
        assert_eq!(cert.null_dimension, 2);
        assert!(cert.notes.iter().any(|n| n.starts_with("grid-verified")));
    }

    #[test]
    fn angular_sweep_touches_zero_once() {
        let check = angular_check(THETA_RESOLUTION, None).unwrap();
        assert_eq!(check.points, 1024);
        assert!(check.verified());
        assert_eq!(check.zero_with_escape, 1);
        assert!(check.min_phi.abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn real_numeric_matches_closed_form(t in -50.0f64..50.0) {
            let x = truth();
            let s = sample(&x, &direction(), t, None).unwrap();
            prop_assert!(s.abs_err <= 1e-9 * (1.0 + t.abs()));
        }

        #[test]
        fn complex_numeric_matches_closed_form(a in 0.0f64..20.0, theta in 0.0f64..(2.0 * PI)) {
            let x = truth().to_complex();
            let s = sample(&x, &direction().to_complex(), a, Some(theta)).unwrap();
            prop_assert!(s.abs_err <= 1e-9 * (1.0 + a));
            prop_assert!(s.closed_form >= 1.0);
        }

        #[test]
        fn convex_on_half_lines(t in 0.0f64..10.0, h in 1e-3f64..1.0) {
            for sign in [1.0, -1.0] {
                let (a, b, c) = (sign * t, sign * (t + h), sign * (t + 2.0 * h));
                let mid = closed_form_real(b);
                prop_assert!(mid <= 0.5 * (closed_form_real(a) + closed_form_real(c)) + 1e-12);
            }
        }
    }
}
