use crate::error::{Error, Result};
use crate::matcore::Matrix;

/// Weak condition value for `l1` minimization at a vector `x` supported on `k`
/// (0-based), in direction `y`:
///
/// ```text
/// sum_{i in K} sign(x_i) y_i + sum_{i not in K} |y_i|
/// ```
///
/// This is the matrix value restricted to diagonal matrices.
pub fn l1_weak_value(x: &[f64], support: &[usize], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!("x has {} entries, y has {}", x.len(), y.len())));
    }
    let mut in_support = vec![false; x.len()];
    for &i in support {
        if i >= x.len() {
            return Err(Error::Shape(format!(
                "support index {i} out of range for length {}",
                x.len()
            )));
        }
        if in_support[i] {
            return Err(Error::Precondition(format!("support index {i} listed twice")));
        }
        in_support[i] = true;
    }
    let mut value = 0.0;
    for (i, (&xi, &yi)) in x.iter().zip(y).enumerate() {
        if in_support[i] {
            if xi == 0.0 {
                return Err(Error::Precondition(format!("x[{i}] is zero but listed in the support")));
            }
            value += xi.signum() * yi;
        } else {
            if xi != 0.0 {
                return Err(Error::Precondition(format!("x[{i}] = {xi} lies outside the support")));
            }
            value += yi.abs();
        }
    }
    Ok(value)
}

/// `diag(v)` as a real square matrix.
pub fn diagonal_embedding(v: &[f64]) -> Matrix {
    Matrix::diag_real(v)
}
