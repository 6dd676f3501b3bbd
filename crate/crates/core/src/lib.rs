//! Certificates for exact recovery of a low-rank matrix by nuclear norm
//! minimization.
//!
//! Given a ground-truth matrix `X` and a linear measurement operator, the
//! [`certify`] module decides whether `X` is the unique minimizer of
//! `||Y||_*` subject to `A(Y) = A(X)`, using a null space condition that is
//! both necessary and sufficient. Supporting modules provide the matrix
//! primitives, the measurement operator, executable block-matrix lemmas, a
//! nuclear norm solver for cross-validation, and the two classical
//! counterexamples.

pub mod certify;
pub mod counterexample;
pub mod error;
pub mod lemmas;
pub mod matcore;
pub mod operator;
pub mod solver;
pub mod sweep;

pub use error::{Error, Result};
pub use matcore::{Field, Matrix};
