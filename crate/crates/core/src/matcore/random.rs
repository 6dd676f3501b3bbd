//! Seeded random matrix ensembles used by sweeps, suites and tests.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::matrix::{Field, Matrix};

/// Independent standard normal entries; complex entries draw the real and
/// imaginary parts independently.
pub fn gaussian<R: Rng + ?Sized>(field: Field, rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let data = DMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = match field {
            Field::Real => 0.0,
            Field::Complex => rng.sample(StandardNormal),
        };
        Complex64::new(re, im)
    });
    Matrix::from_inner(field, data)
}

/// Haar-distributed unitary (orthogonal when real) matrix.
pub fn unitary<R: Rng + ?Sized>(field: Field, n: usize, rng: &mut R) -> Matrix {
    let g = gaussian(field, n, n, rng);
    let qr = g.inner().clone().qr();
    let q = qr.q();
    let r = qr.r();
    // Fix the phases of R's diagonal so the distribution is Haar.
    let data = DMatrix::from_fn(n, n, |i, j| {
        let d = r[(j, j)];
        let phase = if d.norm() == 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            d / Complex64::new(d.norm(), 0.0)
        };
        q[(i, j)] * phase
    });
    let data = match field {
        Field::Real => data.map(|z| Complex64::new(z.re, 0.0)),
        Field::Complex => data,
    };
    Matrix::from_inner(field, data)
}

/// Product of Gaussian `rows x rank` and `rank x cols` factors.
pub fn low_rank<R: Rng + ?Sized>(field: Field, rows: usize, cols: usize, rank: usize, rng: &mut R) -> Matrix {
    let left = gaussian(field, rows, rank, rng);
    let right = gaussian(field, rank, cols, rng);
    &left * &right
}

/// Random matrix with spectral norm exactly `norm`.
pub fn with_spectral_norm<R: Rng + ?Sized>(field: Field, rows: usize, cols: usize, norm: f64, rng: &mut R) -> Matrix {
    let g = gaussian(field, rows, cols, rng);
    let s = super::linalg::spectral_norm(&g).expect("svd of a small gaussian matrix");
    g.scale(norm / s)
}
