use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::operator::NullSpaceBasis;

use super::{maximizing_subgradient, oymak_value, CertifyOptions, GroundTruth};

const STEP0: f64 = 0.5;
const POLISH_ITERS: usize = 300;
const MAX_BAND_LEVEL: usize = 8;

/// Summary of the multi-start sphere search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub starts: usize,
    pub iterations: usize,
    pub best_value: f64,
    pub best_start: usize,
    pub start_minima: Vec<f64>,
    pub band_level_count: usize,
}

pub(super) struct SearchOutcome {
    pub report: SearchReport,
    pub best_coeffs: Vec<f64>,
    /// Distinct minimizers whose value lies inside the zero band.
    pub band_level: Vec<Vec<f64>>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(mut c: Vec<f64>) -> Vec<f64> {
    let n = dot(&c, &c).sqrt();
    c.iter_mut().for_each(|x| *x /= n);
    c
}

fn evaluate(gt: &GroundTruth, basis: &NullSpaceBasis, c: &[f64]) -> Result<(f64, Vec<f64>)> {
    let q = basis.combine(c);
    let value = oymak_value(gt, &q)?;
    let w = maximizing_subgradient(gt, &q)?;
    Ok((value, basis.coordinates(&w)))
}

/// Unit tangent descent direction at `c`, or `None` at a stationary point.
fn tangent_direction(c: &[f64], g: &[f64]) -> Option<Vec<f64>> {
    let along = dot(g, c);
    let t: Vec<f64> = g.iter().zip(c).map(|(gi, ci)| gi - along * ci).collect();
    let n = dot(&t, &t).sqrt();
    (n > 1e-15).then(|| t.into_iter().map(|x| -x / n).collect())
}

fn step_along(c: &[f64], dir: &[f64], s: f64) -> Vec<f64> {
    normalize(c.iter().zip(dir).map(|(ci, di)| ci + s * di).collect())
}

fn run_start(gt: &GroundTruth, basis: &NullSpaceBasis, start: Vec<f64>, iterations: usize) -> Result<(f64, Vec<f64>)> {
    let mut c = normalize(start);
    let (mut f, mut g) = evaluate(gt, basis, &c)?;
    let mut best = (f, c.clone());
    for k in 0..iterations {
        let Some(dir) = tangent_direction(&c, &g) else { break };
        c = step_along(&c, &dir, STEP0 / ((k + 1) as f64).sqrt());
        (f, g) = evaluate(gt, basis, &c)?;
        if f < best.0 {
            best = (f, c.clone());
        }
    }

    // Accept/reject refinement from the best iterate.
    let (mut f, mut c) = best;
    let mut g = evaluate(gt, basis, &c)?.1;
    let mut s = STEP0 / ((iterations + 1) as f64).sqrt();
    for _ in 0..POLISH_ITERS {
        let Some(dir) = tangent_direction(&c, &g) else { break };
        let trial = step_along(&c, &dir, s);
        let (ft, gt_trial) = evaluate(gt, basis, &trial)?;
        if ft < f {
            (f, c, g) = (ft, trial, gt_trial);
            s *= 1.5;
        } else {
            s *= 0.5;
        }
        if s < 1e-14 {
            break;
        }
    }
    Ok((f, c))
}

fn starting_points(d: usize, starts: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(starts);
    for i in 0..d {
        for sign in [1.0, -1.0] {
            if out.len() < starts {
                let mut e = vec![0.0; d];
                e[i] = sign;
                out.push(e);
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while out.len() < starts {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        if dot(&v, &v) > 1e-12 {
            out.push(v);
        }
    }
    out
}

/// Minimizes `phi` over the unit sphere of `basis` coordinates.
pub(super) fn minimize_on_sphere(
    gt: &GroundTruth,
    basis: &NullSpaceBasis,
    opts: &CertifyOptions,
) -> Result<SearchOutcome> {
    let band = opts.band.unwrap_or_else(|| gt.default_band(1.0));
    let starts = starting_points(basis.dimension(), opts.starts.max(1), opts.seed);
    let results: Vec<(f64, Vec<f64>)> = starts
        .into_par_iter()
        .map(|s| run_start(gt, basis, s, opts.iterations))
        .collect::<Result<_>>()?;

    let (best_start, (best_value, best_coeffs)) = results
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
        .map(|(i, r)| (i, r.clone()))
        .expect("at least one start");

    let mut band_level: Vec<Vec<f64>> = Vec::new();
    for (value, c) in &results {
        if value.abs() > band || band_level.len() >= MAX_BAND_LEVEL {
            continue;
        }
        let fresh = band_level.iter().all(|o| {
            let diff: f64 = o.iter().zip(c).map(|(a, b)| (a - b).powi(2)).sum();
            diff.sqrt() > 1e-6
        });
        if fresh {
            band_level.push(c.clone());
        }
    }

    Ok(SearchOutcome {
        report: SearchReport {
            starts: results.len(),
            iterations: opts.iterations,
            best_value,
            best_start,
            start_minima: results.iter().map(|r| r.0).collect(),
            band_level_count: band_level.len(),
        },
        best_coeffs,
        band_level,
    })
}
