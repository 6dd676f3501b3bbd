use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::matrix::{Field, Matrix};
use crate::error::{Error, Result};

/// Relative threshold used when deciding numerical rank.
pub const RANK_TOL_FACTOR: f64 = 1e-12;

/// Candidates whose residual norm falls below this are skipped during completion.
const COMPLETION_SKIP: f64 = 1e-8;

/// Full singular value decomposition `M = U diag(sigma) V^*`.
///
/// `u` is `m x m`, `v` is `n x n`, `sigma` has `min(m, n)` entries sorted
/// in non-increasing order.
#[derive(Clone, Debug)]
pub struct SvdFactors {
    pub u: Matrix,
    pub sigma: Vec<f64>,
    pub v: Matrix,
}

impl SvdFactors {
    pub fn nuclear_norm(&self) -> f64 {
        self.sigma.iter().sum()
    }

    pub fn spectral_norm(&self) -> f64 {
        self.sigma.first().copied().unwrap_or(0.0)
    }

    /// Default rank tolerance `max(m, n) * sigma_0 * 1e-12`.
    pub fn default_rank_tol(&self) -> f64 {
        let (m, n) = (self.u.rows(), self.v.rows());
        m.max(n) as f64 * self.spectral_norm() * RANK_TOL_FACTOR
    }

    /// Number of singular values strictly above `tol`.
    pub fn rank_with_tol(&self, tol: f64) -> usize {
        self.sigma.iter().take_while(|&&s| s > tol).count()
    }

    pub fn rank(&self) -> usize {
        self.rank_with_tol(self.default_rank_tol())
    }

    /// Leading `r` left singular vectors.
    pub fn u_leading(&self, r: usize) -> Matrix {
        self.u.columns(0, r)
    }

    /// Leading `r` right singular vectors.
    pub fn v_leading(&self, r: usize) -> Matrix {
        self.v.columns(0, r)
    }

    /// `U diag(sigma) V^*`, the reconstruction of the decomposed matrix.
    pub fn reconstruct(&self) -> Matrix {
        let (m, n) = (self.u.rows(), self.v.rows());
        let s = diagonal_block(&self.sigma, m, n);
        &(&self.u * &s) * &self.v.adjoint()
    }
}

/// `rows x cols` real matrix with `values` on its leading diagonal.
pub fn diagonal_block(values: &[f64], rows: usize, cols: usize) -> Matrix {
    let data = DMatrix::from_fn(rows, cols, |i, j| {
        if i == j && i < values.len() {
            Complex64::new(values[i], 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    Matrix::from_inner(Field::Real, data)
}

/// Full SVD of `m`. Empty matrices decompose with identity factors.
pub fn svd(m: &Matrix) -> Result<SvdFactors> {
    let (rows, cols) = m.shape();
    if m.is_empty() {
        return Ok(SvdFactors {
            u: Matrix::identity(m.field(), rows),
            sigma: Vec::new(),
            v: Matrix::identity(m.field(), cols),
        });
    }
    let failure = || Error::NumericalFailure {
        what: "singular value decomposition",
        rows,
        cols,
    };
    let (u, sigma, v) = match m.field() {
        Field::Real => {
            let a = faer::Mat::<f64>::from_fn(rows, cols, |i, j| m.re(i, j));
            let dec = a.svd().map_err(|_| failure())?;
            let sigma: Vec<f64> = (0..rows.min(cols)).map(|i| dec.S().column_vector()[i]).collect();
            let u = DMatrix::from_fn(rows, rows, |i, j| dec.U()[(i, j)]);
            let v = DMatrix::from_fn(cols, cols, |i, j| dec.V()[(i, j)]);
            (Matrix::from_real_matrix(&u), sigma, Matrix::from_real_matrix(&v))
        }
        Field::Complex => {
            let a = faer::Mat::<Complex64>::from_fn(rows, cols, |i, j| m.get(i, j));
            let dec = a.svd().map_err(|_| failure())?;
            let sigma: Vec<f64> = (0..rows.min(cols)).map(|i| dec.S().column_vector()[i].re).collect();
            let u = DMatrix::from_fn(rows, rows, |i, j| dec.U()[(i, j)]);
            let v = DMatrix::from_fn(cols, cols, |i, j| dec.V()[(i, j)]);
            (
                Matrix::from_inner(Field::Complex, u),
                sigma,
                Matrix::from_inner(Field::Complex, v),
            )
        }
    };

    let mut order: Vec<usize> = (0..sigma.len()).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]).then(a.cmp(&b)));
    let sigma: Vec<f64> = order.iter().map(|&i| sigma[i].max(0.0)).collect();
    let u = permute_columns(&u, &extended(&order, rows));
    let v = permute_columns(&v, &extended(&order, cols));
    let factors = SvdFactors { u, sigma, v };
    let scale = m.frobenius_norm();
    if (&factors.reconstruct() - m).frobenius_norm() > 1e-9 * (1.0 + scale) {
        return Err(failure());
    }
    Ok(factors)
}

fn permute_columns(m: &Matrix, order: &[usize]) -> Matrix {
    let data = DMatrix::from_fn(m.rows(), order.len(), |i, j| m.get(i, order[j]));
    Matrix::from_inner(m.field(), data)
}

/// `order` followed by the untouched trailing indices up to `n`.
fn extended(order: &[usize], n: usize) -> Vec<usize> {
    order.iter().copied().chain(order.len()..n).collect()
}

pub fn nuclear_norm(m: &Matrix) -> Result<f64> {
    Ok(svd(m)?.nuclear_norm())
}

pub fn spectral_norm(m: &Matrix) -> Result<f64> {
    Ok(svd(m)?.spectral_norm())
}

/// Partial isometry `P = U_r V_r^*` with `Re<P, M> = ||M||_*` and `||P||_2 <= 1`.
pub fn dual_witness(m: &Matrix) -> Result<Matrix> {
    if m.is_empty() || m.frobenius_norm() == 0.0 {
        return Err(Error::Degenerate("dual witness of a zero matrix".into()));
    }
    let f = svd(m)?;
    let r = f.rank();
    Ok(&f.u_leading(r) * &f.v_leading(r).adjoint())
}

/// Extends `n x r` orthonormal columns to an `n x (n - r)` block so that
/// `[U result]` is unitary.
///
/// Canonical basis vectors are orthogonalized against the current set in index
/// order (two Gram-Schmidt passes), near-dependent candidates are skipped, and
/// each new column is rotated so its first entry of largest magnitude is real
/// and positive. The output is therefore a deterministic function of `U`.
pub fn orthonormal_completion(u: &Matrix) -> Result<Matrix> {
    let (n, r) = u.shape();
    if r > n {
        return Err(Error::Precondition(format!(
            "cannot complete {r} columns in dimension {n}"
        )));
    }
    let gram_err = (&(&u.adjoint() * u) - &Matrix::identity(u.field(), r)).frobenius_norm();
    if gram_err > 1e-8 {
        return Err(Error::Precondition(format!(
            "columns are not orthonormal (||U*U - I||_F = {gram_err:e})"
        )));
    }

    let mut basis: Vec<DVector<Complex64>> = (0..r).map(|j| u.column_vec(j)).collect();
    let mut added: Vec<DVector<Complex64>> = Vec::with_capacity(n - r);
    for k in 0..n {
        if basis.len() == n {
            break;
        }
        let mut v = DVector::<Complex64>::zeros(n);
        v[k] = Complex64::new(1.0, 0.0);
        for _ in 0..2 {
            for b in &basis {
                let coeff = b.dotc(&v);
                v -= b * coeff;
            }
        }
        let norm = v.norm();
        if norm < COMPLETION_SKIP {
            continue;
        }
        v /= Complex64::new(norm, 0.0);
        let peak = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let lead = v
            .iter()
            .find(|z| z.norm() >= peak - 1e-12)
            .copied()
            .expect("nonzero vector has a peak entry");
        let phase = lead / Complex64::new(lead.norm(), 0.0);
        v *= phase.conj();
        if u.field() == Field::Real {
            v.iter_mut().for_each(|z| z.im = 0.0);
        }
        basis.push(v.clone());
        added.push(v);
    }
    if added.len() != n - r {
        return Err(Error::NumericalFailure {
            what: "orthonormal completion",
            rows: n,
            cols: r,
        });
    }
    let data = DMatrix::from_fn(n, n - r, |i, j| added[j][i]);
    Ok(Matrix::from_inner(u.field(), data))
}

/// Moore-Penrose pseudoinverse with the default rank tolerance.
pub fn pseudoinverse(m: &Matrix) -> Result<Matrix> {
    let (rows, cols) = m.shape();
    if m.is_empty() {
        return Ok(Matrix::zeros(m.field(), cols, rows));
    }
    let f = svd(m)?;
    let r = f.rank();
    let inv: Vec<f64> = f.sigma[..r].iter().map(|s| 1.0 / s).collect();
    let scaled_v = &f.v_leading(r) * &diagonal_block(&inv, r, r);
    Ok(&scaled_v * &f.u_leading(r).adjoint())
}

/// Smallest eigenvalue of the Hermitian part of a square matrix.
pub fn min_hermitian_eigenvalue(m: &Matrix) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::Shape(format!("eigenvalues of a {:?} matrix", m.shape())));
    }
    let n = m.rows();
    if n == 0 {
        return Ok(f64::INFINITY);
    }
    let h = m.hermitian_part();
    let a = faer::Mat::<Complex64>::from_fn(n, n, |i, j| h.get(i, j));
    let eig = a
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .map_err(|_| Error::NumericalFailure {
            what: "hermitian eigendecomposition",
            rows: n,
            cols: n,
        })?;
    Ok(eig.iter().copied().fold(f64::INFINITY, f64::min))
}

/// `M` is Hermitian (symmetric when real) and positive semidefinite, both
/// within `tol * (1 + ||M||_F)`.
pub fn is_hermitian_psd(m: &Matrix, tol: f64) -> Result<bool> {
    if !m.is_square() {
        return Err(Error::Shape(format!("PSD test of a {:?} matrix", m.shape())));
    }
    let scale = tol * (1.0 + m.frobenius_norm());
    if (m - &m.adjoint()).frobenius_norm() > scale {
        return Ok(false);
    }
    Ok(min_hermitian_eigenvalue(m)? >= -scale)
}

/// Whether to compare column spaces or row spaces.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Orientation {
    Columns,
    Rows,
}

/// Tests whether the column (or row) space of `b` lies inside that of `d`.
///
/// The numerical space of `d` keeps singular directions above
/// `max(rank_tol(d), tol * (1 + ||d||_F))`; containment holds when the
/// residual of `b` after projecting onto it is at most `tol * (1 + ||b||_F)`.
pub fn range_contained(b: &Matrix, d: &Matrix, orientation: Orientation, tol: f64) -> Result<bool> {
    let (b, d) = match orientation {
        Orientation::Columns => (b.clone(), d.clone()),
        Orientation::Rows => (b.adjoint(), d.adjoint()),
    };
    if b.rows() != d.rows() {
        return Err(Error::Shape(format!(
            "range containment of {:?} in {:?} ({:?})",
            b.shape(),
            d.shape(),
            orientation
        )));
    }
    if b.is_empty() {
        return Ok(true);
    }
    let b_norm = b.frobenius_norm();
    let allowed = tol * (1.0 + b_norm);
    if b_norm <= allowed {
        return Ok(true);
    }
    if d.cols() == 0 {
        return Ok(false);
    }
    let f = svd(&d)?;
    let cut = f.default_rank_tol().max(tol * (1.0 + d.frobenius_norm()));
    let r = f.rank_with_tol(cut);
    let basis = f.u_leading(r);
    let projected = &basis * &(&basis.adjoint() * &b);
    Ok((&b - &projected).frobenius_norm() <= allowed)
}
