use crate::error::Result;
use crate::matcore::{self, Matrix, Orientation, SvdFactors};

use super::{Escapes, GroundTruth};

/// Rotated block form of a direction relative to a ground truth.
///
/// With `s = max(m, n)`, the direction is zero-padded to `s x s` and the
/// singular frames of `X` are extended by identity on the padding, so
/// `Q' = [U Ubar]^* Q [V Vbar]` is square. Splitting `Q'` at the rank `r`
/// gives `A' (r x r)`, `B'`, `C'`, `D'`. A second rotation by the singular
/// vectors of `D'` yields `Q''` whose lower-right block is
/// `D'' = diag(Lambda_D', 0)`.
#[derive(Clone, Debug)]
pub struct BlockDecomposition {
    pub size: usize,
    pub rank: usize,
    pub q_prime: Matrix,
    pub d_prime_svd: SvdFactors,
    pub d_rank: usize,
    pub q_double_prime: Matrix,
    /// `Q'' = left^* pad(Q) right`.
    pub left: Matrix,
    pub right: Matrix,
    original_shape: (usize, usize),
}

fn split(m: &Matrix, r: usize) -> [Matrix; 4] {
    let s = m.rows();
    [
        m.block(0, 0, r, r),
        m.block(0, r, r, s - r),
        m.block(r, 0, s - r, r),
        m.block(r, r, s - r, s - r),
    ]
}

impl BlockDecomposition {
    pub fn a_prime(&self) -> Matrix {
        split(&self.q_prime, self.rank)[0].clone()
    }

    pub fn b_prime(&self) -> Matrix {
        split(&self.q_prime, self.rank)[1].clone()
    }

    pub fn c_prime(&self) -> Matrix {
        split(&self.q_prime, self.rank)[2].clone()
    }

    pub fn d_prime(&self) -> Matrix {
        split(&self.q_prime, self.rank)[3].clone()
    }

    /// `[A'', B'', C'', D'']`.
    pub fn double_prime_blocks(&self) -> [Matrix; 4] {
        split(&self.q_double_prime, self.rank)
    }

    /// Undoes both rotations and the padding.
    pub fn reconstruct(&self) -> Matrix {
        let full = &(&self.left * &self.q_double_prime) * &self.right.adjoint();
        let (m, n) = self.original_shape;
        full.block(0, 0, m, n)
    }
}

fn padded_frame(core: &Matrix, s: usize) -> Matrix {
    let k = core.rows();
    Matrix::block_diag(core, &Matrix::identity(core.field(), s - k))
}

pub fn block_decompose(gt: &GroundTruth, q: &Matrix) -> Result<BlockDecomposition> {
    gt.check_direction(q)?;
    let (m, n) = gt.shape();
    let s = m.max(n);
    let r = gt.rank();
    let left_x = padded_frame(&Matrix::hstack(gt.u(), gt.ubar())?, s);
    let right_x = padded_frame(&Matrix::hstack(gt.v(), gt.vbar())?, s);
    let q_pad = q.padded(s, s);
    let q_prime = &(&left_x.adjoint() * &q_pad) * &right_x;

    let d_prime = q_prime.block(r, r, s - r, s - r);
    let d_prime_svd = matcore::svd(&d_prime)?;
    let d_rank = d_prime_svd.rank();
    let field = q_prime.field().join(d_prime_svd.u.field());
    let left = &left_x * &Matrix::block_diag(&Matrix::identity(field, r), &d_prime_svd.u);
    let right = &right_x * &Matrix::block_diag(&Matrix::identity(field, r), &d_prime_svd.v);
    let q_double_prime = &(&left.adjoint() * &q_pad) * &right;

    Ok(BlockDecomposition {
        size: s,
        rank: r,
        q_prime,
        d_prime_svd,
        d_rank,
        q_double_prime,
        left,
        right,
        original_shape: (m, n),
    })
}

pub(super) fn escapes(bd: &BlockDecomposition, tol: f64) -> Result<Escapes> {
    let [_, b, c, d] = bd.double_prime_blocks();
    let qpp = &bd.q_double_prime;
    let asym = (qpp - &qpp.adjoint()).frobenius_norm();
    Ok(Escapes {
        a: !matcore::range_contained(&b, &d, Orientation::Rows, tol)?,
        b: !matcore::range_contained(&c, &d, Orientation::Columns, tol)?,
        c: asym > tol * (1.0 + qpp.frobenius_norm()),
    })
}

/// The affine Hermitian pencil `S(t) = Lambda_X + t (A'' - B'' (D'')^+ C'')`.
pub(super) struct SchurPencil {
    lambda: Vec<f64>,
    slope: Matrix,
}

impl SchurPencil {
    pub(super) fn new(gt: &GroundTruth, bd: &BlockDecomposition) -> Result<SchurPencil> {
        let [a, b, c, d] = bd.double_prime_blocks();
        let correction = if d.is_empty() {
            Matrix::zeros(a.field(), a.rows(), a.cols())
        } else {
            &(&b * &matcore::pseudoinverse(&d)?) * &c
        };
        Ok(SchurPencil {
            lambda: gt.sigma().to_vec(),
            slope: (&a - &correction).hermitian_part(),
        })
    }

    /// Largest `t` with `S(t)` positive semidefinite, `f64::INFINITY` when the
    /// slope is itself semidefinite, `None` when `Lambda` is empty.
    ///
    /// `S(t) >= 0` iff `I + t K >= 0` with `K = Lambda^{-1/2} slope Lambda^{-1/2}`,
    /// so the extent is `-1 / lambda_min(K)`.
    pub(super) fn feasible_extent(&self) -> Result<Option<f64>> {
        let r = self.lambda.len();
        if r == 0 {
            return Ok(None);
        }
        let scale: Vec<f64> = self.lambda.iter().map(|l| 1.0 / l.sqrt()).collect();
        let k = Matrix::from_complex_matrix(nalgebra::DMatrix::from_fn(r, r, |i, j| {
            self.slope.get(i, j) * (scale[i] * scale[j])
        }))
        .realify(0.0);
        let kmin = matcore::min_hermitian_eigenvalue(&k)?;
        if kmin >= 0.0 {
            return Ok(Some(f64::INFINITY));
        }
        Ok(Some(-1.0 / kmin))
    }
}
