use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scalar field a matrix lives over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    Real,
    Complex,
}

impl Field {
    /// The smallest field containing both operands.
    pub fn join(self, other: Field) -> Field {
        if self == Field::Real && other == Field::Real {
            Field::Real
        } else {
            Field::Complex
        }
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Field::Real => f.write_str("real"),
            Field::Complex => f.write_str("complex"),
        }
    }
}

/// Dense rectangular matrix over the reals or the complex numbers.
///
/// Entries are always stored as complex doubles; a `Real` matrix keeps every
/// imaginary part at exactly zero. Zero-sized dimensions are allowed so that
/// block splits at the extremes (`r = 0`, `r = n`) stay uniform.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    field: Field,
    data: DMatrix<Complex64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix<{}> {}x{}", self.field, self.rows(), self.cols())?;
        for i in 0..self.rows() {
            let row: Vec<String> = (0..self.cols())
                .map(|j| {
                    let z = self.data[(i, j)];
                    match self.field {
                        Field::Real => format!("{:.6}", z.re),
                        Field::Complex => format!("{:.6}{:+.6}i", z.re, z.im),
                    }
                })
                .collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

impl Matrix {
    pub(crate) fn from_inner(field: Field, data: DMatrix<Complex64>) -> Matrix {
        if field == Field::Real {
            debug_assert!(
                data.iter().all(|z| z.im == 0.0),
                "real matrix acquired an imaginary part"
            );
        }
        Matrix { field, data }
    }

    pub fn from_complex_matrix(data: DMatrix<Complex64>) -> Matrix {
        Matrix {
            field: Field::Complex,
            data,
        }
    }

    pub fn from_real_matrix(data: &DMatrix<f64>) -> Matrix {
        Matrix {
            field: Field::Real,
            data: data.map(|x| Complex64::new(x, 0.0)),
        }
    }

    pub fn zeros(field: Field, rows: usize, cols: usize) -> Matrix {
        Matrix::from_inner(field, DMatrix::zeros(rows, cols))
    }

    pub fn identity(field: Field, n: usize) -> Matrix {
        Matrix::from_inner(field, DMatrix::identity(n, n))
    }

    /// Builds a real matrix from row-major entries.
    pub fn real(rows: usize, cols: usize, entries: &[f64]) -> Result<Matrix> {
        if entries.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} entries supplied for a {}x{} matrix",
                entries.len(),
                rows,
                cols
            )));
        }
        let data = DMatrix::from_fn(rows, cols, |i, j| Complex64::new(entries[i * cols + j], 0.0));
        Ok(Matrix::from_inner(Field::Real, data))
    }

    /// Builds a complex matrix from row-major entries.
    pub fn complex(rows: usize, cols: usize, entries: &[Complex64]) -> Result<Matrix> {
        if entries.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} entries supplied for a {}x{} matrix",
                entries.len(),
                rows,
                cols
            )));
        }
        let data = DMatrix::from_fn(rows, cols, |i, j| entries[i * cols + j]);
        Ok(Matrix::from_inner(Field::Complex, data))
    }

    pub fn from_fn_real(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> f64) -> Matrix {
        let mut f = f;
        let data = DMatrix::from_fn(rows, cols, |i, j| Complex64::new(f(i, j), 0.0));
        Matrix::from_inner(Field::Real, data)
    }

    pub fn diag_real(values: &[f64]) -> Matrix {
        let n = values.len();
        Matrix::from_fn_real(n, n, |i, j| if i == j { values[i] } else { 0.0 })
    }

    /// Constant real matrix (e.g. the all-ones direction).
    pub fn filled_real(rows: usize, cols: usize, value: f64) -> Matrix {
        Matrix::from_fn_real(rows, cols, |_, _| value)
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows(), self.cols())
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn is_empty(&self) -> bool {
        self.rows() == 0 || self.cols() == 0
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[(i, j)]
    }

    /// Real part of entry `(i, j)`.
    pub fn re(&self, i: usize, j: usize) -> f64 {
        self.data[(i, j)].re
    }

    pub fn inner(&self) -> &DMatrix<Complex64> {
        &self.data
    }

    pub fn into_inner(self) -> DMatrix<Complex64> {
        self.data
    }

    /// Real parts as an `f64` matrix. Only meaningful for real matrices.
    pub fn to_real(&self) -> DMatrix<f64> {
        self.data.map(|z| z.re)
    }

    /// Re-tags the matrix as complex.
    pub fn to_complex(&self) -> Matrix {
        Matrix::from_inner(Field::Complex, self.data.clone())
    }

    /// Promotes to `field` if needed; never demotes.
    pub fn promote(&self, field: Field) -> Matrix {
        Matrix::from_inner(self.field.join(field), self.data.clone())
    }

    /// Row-major entries.
    pub fn entries(&self) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.rows() * self.cols());
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                out.push(self.data[(i, j)]);
            }
        }
        out
    }

    /// Row-major vectorization as a column vector.
    pub fn vectorize(&self) -> DVector<Complex64> {
        DVector::from_vec(self.entries())
    }

    /// Inverse of [`Matrix::vectorize`].
    pub fn unvectorize(field: Field, rows: usize, cols: usize, v: &[Complex64]) -> Matrix {
        assert_eq!(v.len(), rows * cols);
        let data = DMatrix::from_fn(rows, cols, |i, j| v[i * cols + j]);
        Matrix::from_inner(field, data)
    }

    pub fn adjoint(&self) -> Matrix {
        Matrix::from_inner(self.field, self.data.adjoint())
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_inner(self.field, self.data.transpose())
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix::from_inner(self.field, self.data.map(|z| z * s))
    }

    /// Multiplies by a complex scalar; the result is complex unless `s` is real.
    pub fn scale_complex(&self, s: Complex64) -> Matrix {
        if s.im == 0.0 {
            return self.scale(s.re);
        }
        Matrix::from_inner(Field::Complex, self.data.map(|z| z * s))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Frobenius inner product `Tr(self^* other)`.
    pub fn inner_product(&self, other: &Matrix) -> Complex64 {
        assert_eq!(self.shape(), other.shape(), "inner product shape mismatch");
        self.data.iter().zip(other.data.iter()).map(|(a, b)| a.conj() * b).sum()
    }

    /// `Re Tr(self^* other)`, the real inner product on matrix space.
    pub fn real_inner(&self, other: &Matrix) -> f64 {
        self.inner_product(other).re
    }

    pub fn trace(&self) -> Complex64 {
        let n = self.rows().min(self.cols());
        (0..n).map(|i| self.data[(i, i)]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Copy of the `nr x nc` block starting at `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize, nr: usize, nc: usize) -> Matrix {
        assert!(r0 + nr <= self.rows() && c0 + nc <= self.cols(), "block out of range");
        let data = DMatrix::from_fn(nr, nc, |i, j| self.data[(r0 + i, c0 + j)]);
        Matrix::from_inner(self.field, data)
    }

    pub fn columns(&self, start: usize, count: usize) -> Matrix {
        self.block(0, start, self.rows(), count)
    }

    pub fn column_vec(&self, j: usize) -> DVector<Complex64> {
        self.data.column(j).into_owned()
    }

    /// `[a b; c d]`.
    pub fn block2x2(a: &Matrix, b: &Matrix, c: &Matrix, d: &Matrix) -> Result<Matrix> {
        if a.rows() != b.rows() || c.rows() != d.rows() || a.cols() != c.cols() || b.cols() != d.cols() {
            return Err(Error::Shape(format!(
                "incompatible blocks {:?} {:?} / {:?} {:?}",
                a.shape(),
                b.shape(),
                c.shape(),
                d.shape()
            )));
        }
        let field = a.field.join(b.field).join(c.field).join(d.field);
        let (p, q) = (a.rows(), c.rows());
        let (s, t) = (a.cols(), b.cols());
        let mut data = DMatrix::zeros(p + q, s + t);
        data.view_mut((0, 0), (p, s)).copy_from(&a.data);
        data.view_mut((0, s), (p, t)).copy_from(&b.data);
        data.view_mut((p, 0), (q, s)).copy_from(&c.data);
        data.view_mut((p, s), (q, t)).copy_from(&d.data);
        Ok(Matrix::from_inner(field, data))
    }

    /// `[a 0; 0 d]`.
    pub fn block_diag(a: &Matrix, d: &Matrix) -> Matrix {
        let field = a.field.join(d.field);
        let b = Matrix::zeros(field, a.rows(), d.cols());
        let c = Matrix::zeros(field, d.rows(), a.cols());
        Matrix::block2x2(a, &b, &c, d).expect("block_diag shapes are always compatible")
    }

    pub fn hstack(left: &Matrix, right: &Matrix) -> Result<Matrix> {
        if left.rows() != right.rows() {
            return Err(Error::Shape(format!(
                "hstack of {:?} and {:?}",
                left.shape(),
                right.shape()
            )));
        }
        let field = left.field.join(right.field);
        let mut data = DMatrix::zeros(left.rows(), left.cols() + right.cols());
        data.view_mut((0, 0), left.data.shape()).copy_from(&left.data);
        data.view_mut((0, left.cols()), right.data.shape())
            .copy_from(&right.data);
        Ok(Matrix::from_inner(field, data))
    }

    /// Zero-pads to `rows x cols` (top-left aligned).
    pub fn padded(&self, rows: usize, cols: usize) -> Matrix {
        assert!(rows >= self.rows() && cols >= self.cols());
        let mut data = DMatrix::zeros(rows, cols);
        data.view_mut((0, 0), self.data.shape()).copy_from(&self.data);
        Matrix::from_inner(self.field, data)
    }

    /// Hermitian part `(M + M^*) / 2`.
    pub fn hermitian_part(&self) -> Matrix {
        assert!(self.is_square());
        Matrix::from_inner(
            self.field,
            (&self.data + self.data.adjoint()) * Complex64::new(0.5, 0.0),
        )
    }

    /// Largest imaginary magnitude among the entries.
    pub fn max_imag(&self) -> f64 {
        self.data.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }

    /// Drops tiny imaginary parts and re-tags as real when all are below `tol`.
    pub fn realify(&self, tol: f64) -> Matrix {
        if self.field == Field::Real || self.max_imag() > tol {
            return self.clone();
        }
        Matrix::from_inner(Field::Real, self.data.map(|z| Complex64::new(z.re, 0.0)))
    }

    pub fn approx_eq(&self, other: &Matrix, tol: f64) -> bool {
        self.shape() == other.shape() && (self - other).frobenius_norm() <= tol
    }
}

impl<'a> Mul<&'a Matrix> for &'a Matrix {
    type Output = Matrix;
    fn mul(self, rhs: &'a Matrix) -> Matrix {
        assert_eq!(self.cols(), rhs.rows(), "matrix product shape mismatch");
        Matrix::from_inner(self.field.join(rhs.field), &self.data * &rhs.data)
    }
}

impl<'a> Add<&'a Matrix> for &'a Matrix {
    type Output = Matrix;
    fn add(self, rhs: &'a Matrix) -> Matrix {
        assert_eq!(self.shape(), rhs.shape(), "matrix sum shape mismatch");
        Matrix::from_inner(self.field.join(rhs.field), &self.data + &rhs.data)
    }
}

impl<'a> Sub<&'a Matrix> for &'a Matrix {
    type Output = Matrix;
    fn sub(self, rhs: &'a Matrix) -> Matrix {
        assert_eq!(self.shape(), rhs.shape(), "matrix difference shape mismatch");
        Matrix::from_inner(self.field.join(rhs.field), &self.data - &rhs.data)
    }
}

impl Neg for &Matrix {
    type Output = Matrix;
    fn neg(self) -> Matrix {
        self.scale(-1.0)
    }
}
