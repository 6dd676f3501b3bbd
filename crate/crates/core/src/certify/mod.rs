//! Uniqueness certificates for nuclear norm minimization.
//!
//! For a ground truth `X = U diag(sigma) V^*` and a null-space direction `Q`,
//! the weak condition value is
//!
//! ```text
//! phi(Q) = Re Tr(U^* Q V) + ||Ubar^* Q Vbar||_*
//! ```
//!
//! `X` is the unique minimizer iff every nonzero kernel direction has
//! `phi > 0`, or `phi = 0` together with at least one escape condition on the
//! rotated block matrix `Q''` (see [`block_decompose`]). Directions with
//! `phi < 0` are descent directions; zero directions without an escape carry
//! a segment of minimizers `X + tQ`, located through a Schur complement
//! feasibility search.

mod blocks;
mod search;
mod sparse;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{self, Matrix, SvdFactors};
use crate::operator::{self, MeasurementOperator, NullSpaceBasis};

pub use blocks::{block_decompose, BlockDecomposition};
pub use search::SearchReport;
pub use sparse::{diagonal_embedding, l1_weak_value};

/// Factored ground truth with its singular subspaces and their completions.
#[derive(Clone, Debug)]
pub struct GroundTruth {
    x: Matrix,
    svd: SvdFactors,
    rank: usize,
    u: Matrix,
    v: Matrix,
    ubar: Matrix,
    vbar: Matrix,
    nuclear: f64,
}

impl GroundTruth {
    /// Builds a ground truth from an explicit (full) SVD of `x`, so callers can
    /// supply any valid choice of singular vectors.
    pub fn from_factors(x: &Matrix, factors: SvdFactors, rank: usize) -> Result<GroundTruth> {
        let (m, n) = x.shape();
        if factors.u.shape() != (m, m) || factors.v.shape() != (n, n) || factors.sigma.len() != m.min(n) {
            return Err(Error::Shape(format!(
                "factors {:?}/{}/{:?} do not decompose a {m}x{n} matrix",
                factors.u.shape(),
                factors.sigma.len(),
                factors.v.shape()
            )));
        }
        if rank > m.min(n) {
            return Err(Error::Precondition(format!("rank {rank} exceeds min({m}, {n})")));
        }
        let resid = (&factors.reconstruct() - x).frobenius_norm();
        if resid > 1e-8 * (1.0 + x.frobenius_norm()) {
            return Err(Error::Precondition(format!(
                "factors do not reconstruct the matrix (residual {resid:e})"
            )));
        }
        let field = x.field().join(factors.u.field());
        let u = factors.u_leading(rank).promote(field);
        let v = factors.v_leading(rank).promote(field);
        let ubar = matcore::orthonormal_completion(&u)?;
        let vbar = matcore::orthonormal_completion(&v)?;
        let nuclear = factors.sigma[..rank].iter().sum();
        Ok(GroundTruth {
            x: x.clone(),
            svd: factors,
            rank,
            u,
            v,
            ubar,
            vbar,
            nuclear,
        })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.x
    }

    pub fn svd(&self) -> &SvdFactors {
        &self.svd
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn shape(&self) -> (usize, usize) {
        self.x.shape()
    }

    pub fn u(&self) -> &Matrix {
        &self.u
    }

    pub fn v(&self) -> &Matrix {
        &self.v
    }

    pub fn ubar(&self) -> &Matrix {
        &self.ubar
    }

    pub fn vbar(&self) -> &Matrix {
        &self.vbar
    }

    /// Leading `rank` singular values.
    pub fn sigma(&self) -> &[f64] {
        &self.svd.sigma[..self.rank]
    }

    /// `||X||_*` over the retained singular values.
    pub fn nuclear_norm(&self) -> f64 {
        self.nuclear
    }

    /// Side of the zero-padded square the block analysis works in.
    pub fn square_size(&self) -> usize {
        let (m, n) = self.shape();
        m.max(n)
    }

    /// Default zero band `1e-8 (1 + ||X||_*) ||Q||_F`.
    pub fn default_band(&self, q_frobenius: f64) -> f64 {
        1e-8 * (1.0 + self.nuclear) * q_frobenius
    }

    fn check_direction(&self, q: &Matrix) -> Result<()> {
        if q.shape() != self.shape() {
            return Err(Error::Shape(format!(
                "direction is {:?}, ground truth is {:?}",
                q.shape(),
                self.shape()
            )));
        }
        Ok(())
    }
}

/// Factors `x` and fixes its numerical rank with the default tolerance.
pub fn prepare_ground_truth(x: &Matrix) -> Result<GroundTruth> {
    if x.is_empty() {
        return Err(Error::Shape("ground truth must be nonempty".into()));
    }
    let factors = matcore::svd(x)?;
    let rank = factors.rank();
    GroundTruth::from_factors(x, factors, rank)
}

/// The two parts of the weak condition value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakValue {
    /// `Re Tr(U^* Q V)`.
    pub trace_term: f64,
    /// `||Ubar^* Q Vbar||_*`.
    pub nuclear_term: f64,
}

impl WeakValue {
    pub fn phi(&self) -> f64 {
        self.trace_term + self.nuclear_term
    }
}

pub fn weak_value_terms(gt: &GroundTruth, q: &Matrix) -> Result<WeakValue> {
    gt.check_direction(q)?;
    let trace_term = (&(&gt.u.adjoint() * q) * &gt.v).trace().re;
    let inner = &(&gt.ubar.adjoint() * q) * &gt.vbar;
    let nuclear_term = matcore::nuclear_norm(&inner)?;
    Ok(WeakValue {
        trace_term,
        nuclear_term,
    })
}

/// `Re Tr(U^* Q V) + ||Ubar^* Q Vbar||_*`, the support function of the nuclear
/// norm subdifferential at `X` evaluated at `Q`.
pub fn oymak_value(gt: &GroundTruth, q: &Matrix) -> Result<f64> {
    Ok(weak_value_terms(gt, q)?.phi())
}

/// Element of the subdifferential at `X` attaining [`oymak_value`] for `q`:
/// `U V^* + Ubar P Vbar^*` with `P` a dual witness of `Ubar^* Q Vbar`.
pub fn maximizing_subgradient(gt: &GroundTruth, q: &Matrix) -> Result<Matrix> {
    gt.check_direction(q)?;
    let mut w = &gt.u * &gt.v.adjoint();
    let inner = &(&gt.ubar.adjoint() * q) * &gt.vbar;
    if !inner.is_empty() && inner.frobenius_norm() > 0.0 {
        let p = matcore::dual_witness(&inner)?;
        w = &w + &(&(&gt.ubar * &p) * &gt.vbar.adjoint());
    }
    Ok(w)
}

/// `(||X + t0 Q||_* - ||X||_*) / t0`. By convexity this over-estimates the
/// one-sided directional derivative and decreases toward it as `t0 -> 0`.
pub fn one_sided_derivative_estimate(gt: &GroundTruth, q: &Matrix, t0: f64) -> Result<f64> {
    gt.check_direction(q)?;
    if t0.is_nan() || t0 <= 0.0 {
        return Err(Error::Precondition(format!("step t0 = {t0} must be positive")));
    }
    // nuclear_norm(X) recomputed the same way as the perturbed side so the
    // difference does not mix rank-truncated and full sums.
    let base = matcore::nuclear_norm(&gt.x)?;
    let moved = matcore::nuclear_norm(&(&gt.x + &q.scale(t0)))?;
    Ok((moved - base) / t0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VerdictCase {
    StrictlyPositive,
    ZeroWithEscape,
    ZeroNoEscape,
    Negative,
}

/// Which escape conditions hold for a zero-valued direction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Escapes {
    /// Row space of `B''` is not inside the row space of `D''`.
    pub a: bool,
    /// Column space of `C''` is not inside the column space of `D''`.
    pub b: bool,
    /// `Q''` is not symmetric (Hermitian in the complex case).
    pub c: bool,
}

impl Escapes {
    pub fn any(&self) -> bool {
        self.a || self.b || self.c
    }

    pub fn labels(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.a {
            out.push("a");
        }
        if self.b {
            out.push("b");
        }
        if self.c {
            out.push("c");
        }
        out
    }
}

impl Serialize for Escapes {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.labels().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Escapes {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let labels = Vec::<String>::deserialize(deserializer)?;
        let mut e = Escapes::default();
        for l in labels {
            match l.as_str() {
                "a" => e.a = true,
                "b" => e.b = true,
                "c" => e.c = true,
                other => return Err(D::Error::custom(format!("unknown escape label {other:?}"))),
            }
        }
        Ok(e)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionVerdict {
    pub phi: f64,
    pub case: VerdictCase,
    pub escapes: Escapes,
    pub tolerance_band: f64,
    pub terms: WeakValue,
    /// The retained rank fills the padded square, so `B''`, `C''`, `D''` are
    /// empty and only the symmetry escape can fire.
    pub full_rank_edge: bool,
}

/// Classifies `q` against the band and, for zero values, evaluates the escape
/// conditions on the normalized direction.
///
/// `band` defaults to [`GroundTruth::default_band`]; the escape tests use the
/// band divided by `||Q||_F`, so scaling `q` and `band` together leaves the
/// verdict unchanged.
pub fn direction_verdict(gt: &GroundTruth, q: &Matrix, band: Option<f64>) -> Result<DirectionVerdict> {
    gt.check_direction(q)?;
    let q_norm = q.frobenius_norm();
    if q_norm <= 1e-12 {
        return Err(Error::Degenerate("direction has zero Frobenius norm".into()));
    }
    let band = band.unwrap_or_else(|| gt.default_band(q_norm));
    let terms = weak_value_terms(gt, q)?;
    let phi = terms.phi();
    let full_rank_edge = gt.rank == gt.square_size();
    let (case, escapes) = if phi > band {
        (VerdictCase::StrictlyPositive, Escapes::default())
    } else if phi < -band {
        (VerdictCase::Negative, Escapes::default())
    } else {
        let unit = q.scale(1.0 / q_norm);
        let escapes = blocks::escapes(&block_decompose(gt, &unit)?, band / q_norm)?;
        let case = if escapes.any() {
            VerdictCase::ZeroWithEscape
        } else {
            VerdictCase::ZeroNoEscape
        };
        (case, escapes)
    };
    Ok(DirectionVerdict {
        phi,
        case,
        escapes,
        tolerance_band: band,
        terms,
        full_rank_edge,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Unique,
    NotUnique,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exact,
    Heuristic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WitnessKind {
    /// `||X + tQ||_* < ||X||_*`.
    Descent,
    /// `||X + tQ||_* = ||X||_*` on a segment.
    Flat,
}

/// A feasible point `X + tQ` that is at least as good as `X`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    #[serde(rename = "Q")]
    pub q: Matrix,
    pub t: f64,
    pub kind: WitnessKind,
    pub nuclear_norm_truth: f64,
    pub nuclear_norm_at_t: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionRecord {
    pub label: String,
    pub phi: f64,
    pub case: VerdictCase,
    pub escapes: Escapes,
    pub norms: DirectionNorms,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionNorms {
    pub trace_term: f64,
    pub nuclear_term: f64,
    pub frobenius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertifyOptions {
    /// Overrides the default zero band for unit directions.
    pub band: Option<f64>,
    pub starts: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            band: None,
            starts: 32,
            iterations: 500,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryCertificate {
    pub status: Status,
    pub mode: Mode,
    pub band: f64,
    pub rank: usize,
    pub null_dimension: usize,
    pub directions: Vec<DirectionRecord>,
    pub witness: Option<Witness>,
    pub search_report: Option<SearchReport>,
    pub notes: Vec<String>,
    pub seed: u64,
    pub options: CertifyOptions,
}

impl RecoveryCertificate {
    /// Smallest condition value seen, over the recorded directions and the search.
    pub fn min_phi(&self) -> Option<f64> {
        let listed = self.directions.iter().map(|d| d.phi);
        let searched = self.search_report.iter().map(|s| s.best_value);
        listed.chain(searched).reduce(f64::min)
    }
}

fn record(label: String, q: &Matrix, v: &DirectionVerdict) -> DirectionRecord {
    DirectionRecord {
        label,
        phi: v.phi,
        case: v.case,
        escapes: v.escapes,
        norms: DirectionNorms {
            trace_term: v.terms.trace_term,
            nuclear_term: v.terms.nuclear_term,
            frobenius: q.frobenius_norm(),
        },
    }
}

/// Tolerance for accepting a flat witness: `1e-8 (1 + ||X||_*)`.
fn flat_tolerance(gt: &GroundTruth) -> f64 {
    1e-8 * (1.0 + gt.nuclear)
}

/// Scans `t = 1e-4 * 2^k` (then smaller steps) for a strict decrease of the
/// nuclear norm along `q`.
pub fn descent_witness(gt: &GroundTruth, q: &Matrix) -> Result<Option<Witness>> {
    let base = matcore::nuclear_norm(&gt.x)?;
    let scan = |ts: &mut dyn Iterator<Item = f64>, best: &mut Option<(f64, f64)>| -> Result<()> {
        for t in ts {
            let value = matcore::nuclear_norm(&(&gt.x + &q.scale(t)))?;
            if best.is_none_or(|(_, v)| value < v) {
                *best = Some((t, value));
            }
        }
        Ok(())
    };
    let mut best = None;
    scan(&mut (0..=20).map(|k| 1e-4 * 2f64.powi(k)), &mut best)?;
    if best.is_none_or(|(_, v)| v >= base - 1e-12) {
        scan(&mut (1..=20).map(|k| 1e-4 * 2f64.powi(-k)), &mut best)?;
    }
    Ok(best.filter(|&(_, v)| v < base - 1e-12).map(|(t, v)| Witness {
        q: q.clone(),
        t,
        kind: WitnessKind::Descent,
        nuclear_norm_truth: base,
        nuclear_norm_at_t: v,
    }))
}

/// For a zero direction without escapes, finds `t > 0` at the middle of the
/// interval where the Schur complement `Lambda + t A'' - t B'' (D'')^+ C''`
/// stays positive semidefinite, then confirms `||X + tQ||_* = ||X||_*`.
pub fn flat_witness(gt: &GroundTruth, q: &Matrix) -> Result<Option<Witness>> {
    let q_norm = q.frobenius_norm();
    let unit = q.scale(1.0 / q_norm);
    let bd = block_decompose(gt, &unit)?;
    let schur = blocks::SchurPencil::new(gt, &bd)?;
    let t_unit = match schur.feasible_extent()? {
        Some(t_max) => 0.5 * t_max,
        None => return Ok(None),
    };
    let base = matcore::nuclear_norm(&gt.x)?;
    let tol = flat_tolerance(gt);
    let mut t = t_unit / q_norm;
    for _ in 0..40 {
        let value = matcore::nuclear_norm(&(&gt.x + &q.scale(t)))?;
        if (value - base).abs() <= tol {
            return Ok(Some(Witness {
                q: q.clone(),
                t,
                kind: WitnessKind::Flat,
                nuclear_norm_truth: base,
                nuclear_norm_at_t: value,
            }));
        }
        t *= 0.5;
    }
    Ok(None)
}

fn witness_for(gt: &GroundTruth, q: &Matrix, case: VerdictCase) -> Result<Option<Witness>> {
    match case {
        VerdictCase::Negative => descent_witness(gt, q),
        VerdictCase::ZeroNoEscape => flat_witness(gt, q),
        _ => Ok(None),
    }
}

/// Decides uniqueness of `X` over the whole null space `basis`.
///
/// One-dimensional kernels are decided exactly from the verdicts of `+N` and
/// `-N`. Larger kernels minimize `phi` over the unit sphere by multi-start
/// projected subgradient descent and report `mode = heuristic`.
pub fn certify_recovery(
    gt: &GroundTruth,
    basis: &NullSpaceBasis,
    opts: &CertifyOptions,
) -> Result<RecoveryCertificate> {
    if basis.shape != gt.shape() {
        return Err(Error::Shape(format!(
            "null space basis is {:?}, ground truth is {:?}",
            basis.shape,
            gt.shape()
        )));
    }
    let band = opts.band.unwrap_or_else(|| gt.default_band(1.0));
    let d = basis.dimension();
    let mut notes = Vec::new();
    if gt.rank == gt.square_size() && d > 0 {
        notes.push("full-rank edge: B'', C'', D'' are empty, so only the symmetry escape applies".into());
    }
    if gt.rank == 0 && d > 0 {
        notes.push("zero ground truth: every nonzero direction has phi = ||Q||_* > 0".into());
    }
    let mut cert = RecoveryCertificate {
        status: Status::Unique,
        mode: Mode::Exact,
        band,
        rank: gt.rank,
        null_dimension: d,
        directions: Vec::new(),
        witness: None,
        search_report: None,
        notes,
        seed: opts.seed,
        options: opts.clone(),
    };
    if d == 0 {
        cert.notes.push("trivial null space".into());
        return Ok(cert);
    }

    let mut first_bad: Option<(Matrix, VerdictCase)> = None;
    for (i, n) in basis.directions.iter().enumerate() {
        for (sign, label) in [(1.0, "+"), (-1.0, "-")] {
            let q = n.scale(sign);
            let v = direction_verdict(gt, &q, Some(band * q.frobenius_norm()))?;
            if matches!(v.case, VerdictCase::Negative | VerdictCase::ZeroNoEscape) && first_bad.is_none() {
                first_bad = Some((q.clone(), v.case));
            }
            cert.directions.push(record(format!("{label}N{}", i + 1), &q, &v));
        }
    }

    if d == 1 {
        if let Some((q, case)) = first_bad {
            cert.status = Status::NotUnique;
            cert.witness = witness_for(gt, &q, case)?;
            if cert.witness.is_none() {
                cert.notes
                    .push("witness search failed to confirm the non-unique direction numerically".into());
            }
        }
        return Ok(cert);
    }

    cert.mode = Mode::Heuristic;
    if let Some((q, case)) = &first_bad {
        if let Some(w) = witness_for(gt, q, *case)? {
            cert.status = Status::NotUnique;
            cert.witness = Some(w);
            return Ok(cert);
        }
    }

    let outcome = search::minimize_on_sphere(gt, basis, opts)?;
    let best = outcome.report.best_value;
    cert.search_report = Some(outcome.report.clone());
    cert.status = if best < -band {
        let q = basis.combine(&outcome.best_coeffs);
        match descent_witness(gt, &q)? {
            Some(w) => {
                cert.witness = Some(w);
                Status::NotUnique
            }
            None => Status::Inconclusive,
        }
    } else if best > 10.0 * band {
        Status::Unique
    } else if best > band {
        cert.notes.push("search minimum lies just above the zero band".into());
        Status::Inconclusive
    } else {
        let mut status = Status::Unique;
        for coeffs in &outcome.band_level {
            let q = basis.combine(coeffs);
            let v = direction_verdict(gt, &q, Some(band * q.frobenius_norm()))?;
            match v.case {
                VerdictCase::ZeroWithEscape | VerdictCase::StrictlyPositive => {}
                VerdictCase::ZeroNoEscape => match flat_witness(gt, &q)? {
                    Some(w) => {
                        cert.witness = Some(w);
                        status = Status::NotUnique;
                        break;
                    }
                    None => status = Status::Inconclusive,
                },
                VerdictCase::Negative => status = Status::Inconclusive,
            }
        }
        status
    };
    Ok(cert)
}

/// Convenience wrapper: factor `x`, extract the kernel of `op`, certify.
pub fn certify_operator(x: &Matrix, op: &MeasurementOperator, opts: &CertifyOptions) -> Result<RecoveryCertificate> {
    op.check_input(&x.promote(op.field()))?;
    let gt = prepare_ground_truth(x)?;
    let basis = operator::null_space_basis(op)?;
    certify_recovery(&gt, &basis, opts)
}
