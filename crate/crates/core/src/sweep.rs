//! Random-ensemble cross-validation of certificates against the solver.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certify::{certify_recovery, prepare_ground_truth, CertifyOptions, Status};
use crate::error::{Error, Result};
use crate::matcore::{random, Field};
use crate::operator::{apply, gaussian_operator, null_space_basis};
use crate::solver::{default_probe_grid, solve_nnm, uniqueness_probe, SolverOptions};

/// Relative recovery tolerance `||Y - X||_F <= RECOVERY_TOL (1 + ||X||_F)`.
pub const RECOVERY_TOL: f64 = 1e-4;
/// Instances with `|min phi| <= BAND_EDGE_FACTOR * band` are excluded from the rate.
pub const BAND_EDGE_FACTOR: f64 = 10.0;

const OPERATOR_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub n: usize,
    pub r: usize,
    pub m_list: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    #[serde(default)]
    pub certify: CertifyOptions,
    #[serde(default)]
    pub solver: SolverOptions,
}

impl SweepConfig {
    pub fn new(n: usize, r: usize, m_list: Vec<usize>, trials: usize, seed: u64) -> SweepConfig {
        SweepConfig {
            n,
            r,
            m_list,
            trials,
            seed,
            certify: CertifyOptions::default(),
            solver: SolverOptions::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.r == 0 || self.r > self.n {
            return Err(Error::Precondition(format!(
                "need 1 <= r <= n, got n = {}, r = {}",
                self.n, self.r
            )));
        }
        if self.m_list.is_empty() {
            return Err(Error::Precondition("m_list is empty".into()));
        }
        if let Some(&m) = self.m_list.iter().find(|&&m| m == 0 || m > self.n * self.n) {
            return Err(Error::Precondition(format!(
                "m = {m} must lie in 1..={}",
                self.n * self.n
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverVerdict {
    Unique,
    NotUnique,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepInstance {
    pub index: usize,
    pub seed: u64,
    pub m: usize,
    pub null_dimension: usize,
    pub status: Status,
    pub min_phi: Option<f64>,
    pub band: f64,
    pub band_edge: bool,
    pub truth_nuclear: f64,
    pub objective: f64,
    pub recovery_error: f64,
    pub recovery_tolerance: f64,
    pub recovered: bool,
    pub solver_converged: bool,
    pub probe_flat: usize,
    pub probe_descent: usize,
    pub solver_verdict: SolverVerdict,
    /// `None` for band-edge instances.
    pub agree: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Disagreement {
    pub index: usize,
    pub status: Status,
    pub solver_verdict: SolverVerdict,
    /// `min phi / band`.
    pub phi_margin: Option<f64>,
    /// `recovery_error / recovery_tolerance`.
    pub recovery_margin: f64,
    pub within_tolerance: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub config: SweepConfig,
    pub instances: Vec<SweepInstance>,
    pub counted: usize,
    pub agreed: usize,
    pub band_edge: usize,
    /// `agreed / counted`, or 1 when nothing is counted.
    pub agreement_rate: f64,
    pub disagreements: Vec<Disagreement>,
}

impl SweepReport {
    pub fn merge(reports: &[SweepReport]) -> Option<SweepSummary> {
        if reports.is_empty() {
            return None;
        }
        let counted: usize = reports.iter().map(|r| r.counted).sum();
        let agreed: usize = reports.iter().map(|r| r.agreed).sum();
        Some(SweepSummary {
            instances: reports.iter().map(|r| r.instances.len()).sum(),
            counted,
            agreed,
            band_edge: reports.iter().map(|r| r.band_edge).sum(),
            agreement_rate: rate(agreed, counted),
            disagreements: reports.iter().flat_map(|r| r.disagreements.iter().cloned()).collect(),
        })
    }
}

/// Totals across several sweeps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub instances: usize,
    pub counted: usize,
    pub agreed: usize,
    pub band_edge: usize,
    pub agreement_rate: f64,
    pub disagreements: Vec<Disagreement>,
}

fn rate(agreed: usize, counted: usize) -> f64 {
    if counted == 0 {
        1.0
    } else {
        agreed as f64 / counted as f64
    }
}

fn run_instance(cfg: &SweepConfig, index: usize, m: usize) -> Result<SweepInstance> {
    let seed = cfg.seed.wrapping_add(index as u64);
    let n = cfg.n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = random::low_rank(Field::Real, n, n, cfg.r, &mut rng);
    let op = gaussian_operator((n, n), m, seed ^ OPERATOR_SEED_SALT)?;

    let gt = prepare_ground_truth(&x)?;
    let basis = null_space_basis(&op)?;
    let cert = certify_recovery(
        &gt,
        &basis,
        &CertifyOptions {
            seed,
            ..cfg.certify.clone()
        },
    )?;
    let min_phi = cert.min_phi();
    let band_edge =
        cert.status == Status::Inconclusive || min_phi.is_some_and(|p| p.abs() <= BAND_EDGE_FACTOR * cert.band);

    let b = apply(&op, &x)?;
    let sol = solve_nnm(
        &op,
        &b,
        &SolverOptions {
            seed,
            ..cfg.solver.clone()
        },
    )?;
    let recovery_error = (&sol.y - &x).frobenius_norm();
    let recovery_tolerance = RECOVERY_TOL * (1.0 + x.frobenius_norm());
    let recovered = recovery_error <= recovery_tolerance;
    let probe = uniqueness_probe(&sol.y, &basis, &default_probe_grid())?;
    let solver_verdict = if recovered && !probe.any_flag() {
        SolverVerdict::Unique
    } else {
        SolverVerdict::NotUnique
    };

    let agree = (!band_edge).then(|| match cert.status {
        Status::Unique => recovered,
        Status::NotUnique => !recovered || probe.any_flag(),
        Status::Inconclusive => unreachable!("inconclusive instances are band-edge"),
    });

    Ok(SweepInstance {
        index,
        seed,
        m,
        null_dimension: basis.dimension(),
        status: cert.status,
        min_phi,
        band: cert.band,
        band_edge,
        truth_nuclear: gt.nuclear_norm(),
        objective: sol.objective,
        recovery_error,
        recovery_tolerance,
        recovered,
        solver_converged: sol.converged,
        probe_flat: probe.flat,
        probe_descent: probe.descent,
        solver_verdict,
        agree,
    })
}

/// Runs `trials` instances for each `m` in order; instance `k` uses seed `seed + k`.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepReport> {
    cfg.validate()?;
    let jobs: Vec<(usize, usize)> = cfg
        .m_list
        .iter()
        .flat_map(|&m| std::iter::repeat_n(m, cfg.trials))
        .enumerate()
        .collect();
    let instances: Vec<SweepInstance> = jobs
        .into_par_iter()
        .map(|(i, m)| run_instance(cfg, i, m))
        .collect::<Result<_>>()?;

    let counted = instances.iter().filter(|i| i.agree.is_some()).count();
    let agreed = instances.iter().filter(|i| i.agree == Some(true)).count();
    let disagreements = instances
        .iter()
        .filter(|i| i.agree == Some(false))
        .map(|i| {
            let phi_margin = i.min_phi.map(|p| p / i.band);
            let recovery_margin = i.recovery_error / i.recovery_tolerance;
            Disagreement {
                index: i.index,
                status: i.status,
                solver_verdict: i.solver_verdict,
                phi_margin,
                recovery_margin,
                within_tolerance: phi_margin.is_some_and(|p| p.abs() <= BAND_EDGE_FACTOR * BAND_EDGE_FACTOR)
                    || recovery_margin <= BAND_EDGE_FACTOR,
            }
        })
        .collect();
    Ok(SweepReport {
        config: cfg.clone(),
        band_edge: instances.len() - counted,
        agreement_rate: rate(agreed, counted),
        instances,
        counted,
        agreed,
        disagreements,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_sweep_agrees() {
        let cfg = SweepConfig::new(3, 1, vec![8, 7], 3, 11);
        let report = run_sweep(&cfg).unwrap();
        assert_eq!(report.instances.len(), 6);
        assert_eq!(report.counted + report.band_edge, 6);
        assert!(report.disagreements.is_empty(), "{:?}", report.disagreements);
        assert_eq!(report.instances[3].m, 7);
        assert_eq!(report.instances[3].null_dimension, 2);
    }

    #[test]
    fn full_measurement_set_is_unique() {
        let report = run_sweep(&SweepConfig::new(3, 2, vec![9], 2, 5)).unwrap();
        for i in &report.instances {
            assert_eq!(i.null_dimension, 0);
            assert_eq!(i.status, Status::Unique);
            assert!(i.recovered);
        }
    }

    #[test]
    fn deterministic() {
        let cfg = SweepConfig::new(3, 1, vec![8], 2, 3);
        let a = serde_json::to_string(&run_sweep(&cfg).unwrap()).unwrap();
        let b = serde_json::to_string(&run_sweep(&cfg).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_config() {
        for cfg in [
            SweepConfig::new(3, 4, vec![8], 1, 0),
            SweepConfig::new(3, 1, vec![], 1, 0),
            SweepConfig::new(3, 1, vec![10], 1, 0),
        ] {
            assert!(matches!(run_sweep(&cfg), Err(Error::Precondition(_))));
        }
    }
}
