//! Dense matrix primitives: SVD, norms, completions, pseudoinverse and the
//! PSD / range predicates the certificate logic is built on.

mod json;
mod linalg;
mod matrix;
pub mod random;

pub use json::{matrix_from_json, matrix_to_json};
pub use linalg::{
    diagonal_block, dual_witness, is_hermitian_psd, min_hermitian_eigenvalue, nuclear_norm, orthonormal_completion,
    pseudoinverse, range_contained, spectral_norm, svd, Orientation, SvdFactors, RANK_TOL_FACTOR,
};
pub use matrix::{Field, Matrix};
pub use num_complex::Complex64;
