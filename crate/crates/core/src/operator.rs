//! Linear measurement maps `A(X)_i = <A_i, X> = Tr(A_i^* X)` and their null spaces.
//!
//! Complex operators act complex-linearly, but null spaces are always
//! reported over real coordinates `(Re X, Im X)`: a complex kernel of
//! complex dimension `k` comes back as `2k` real-orthonormal directions.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{self, random, Field, Matrix};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OperatorDoc", into = "OperatorDoc")]
pub struct MeasurementOperator {
    shape: (usize, usize),
    field: Field,
    measurements: Vec<Matrix>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OperatorDoc {
    shape: [usize; 2],
    field: Field,
    measurements: Vec<Matrix>,
}

impl TryFrom<OperatorDoc> for MeasurementOperator {
    type Error = Error;
    fn try_from(doc: OperatorDoc) -> Result<Self> {
        MeasurementOperator::new((doc.shape[0], doc.shape[1]), doc.field, doc.measurements)
    }
}

impl From<MeasurementOperator> for OperatorDoc {
    fn from(op: MeasurementOperator) -> Self {
        OperatorDoc {
            shape: [op.shape.0, op.shape.1],
            field: op.field,
            measurements: op.measurements,
        }
    }
}

impl MeasurementOperator {
    /// Validates that every measurement matrix has `shape` and lives in `field`.
    pub fn new(shape: (usize, usize), field: Field, measurements: Vec<Matrix>) -> Result<Self> {
        if shape.0 == 0 || shape.1 == 0 {
            return Err(Error::Shape(format!("operator shape {shape:?} has a zero dimension")));
        }
        for (i, a) in measurements.iter().enumerate() {
            if a.shape() != shape {
                return Err(Error::Shape(format!(
                    "measurement {i} is {:?}, operator shape is {shape:?}",
                    a.shape()
                )));
            }
            if a.field() != field {
                return Err(Error::FieldMismatch(format!(
                    "measurement {i} is {}, operator field is {field}",
                    a.field()
                )));
            }
        }
        Ok(MeasurementOperator {
            shape,
            field,
            measurements,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        self.shape
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn measurements(&self) -> &[Matrix] {
        &self.measurements
    }

    /// Number of measurements `m`.
    pub fn len(&self) -> usize {
        self.measurements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measurements.is_empty()
    }

    /// Dimension of the real coordinate space the operator acts on.
    pub fn real_dimension(&self) -> usize {
        let n = self.shape.0 * self.shape.1;
        match self.field {
            Field::Real => n,
            Field::Complex => 2 * n,
        }
    }

    pub(crate) fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.shape() != self.shape {
            return Err(Error::Shape(format!(
                "input is {:?}, operator expects {:?}",
                x.shape(),
                self.shape
            )));
        }
        if x.field() != self.field {
            return Err(Error::FieldMismatch(format!(
                "input is {}, operator is {}",
                x.field(),
                self.field
            )));
        }
        Ok(())
    }

    /// Frobenius norm of the stacked measurement matrices.
    pub fn norm(&self) -> f64 {
        self.measurements
            .iter()
            .map(|a| a.frobenius_norm().powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// The real matrix of the operator in the coordinates of [`to_real_coords`].
    ///
    /// Real operators give one row per measurement. Complex operators give two
    /// rows per measurement, the real and imaginary parts of `<A_i, X>`.
    pub fn real_system(&self) -> DMatrix<f64> {
        let n = self.shape.0 * self.shape.1;
        match self.field {
            Field::Real => {
                let mut s = DMatrix::zeros(self.len(), n);
                for (i, a) in self.measurements.iter().enumerate() {
                    for (k, z) in a.entries().into_iter().enumerate() {
                        s[(i, k)] = z.re;
                    }
                }
                s
            }
            Field::Complex => {
                let mut s = DMatrix::zeros(2 * self.len(), 2 * n);
                for (i, a) in self.measurements.iter().enumerate() {
                    for (k, z) in a.entries().into_iter().enumerate() {
                        // conj(a) x = (a_re x_re + a_im x_im) + i (a_re x_im - a_im x_re)
                        s[(2 * i, k)] = z.re;
                        s[(2 * i, n + k)] = z.im;
                        s[(2 * i + 1, k)] = -z.im;
                        s[(2 * i + 1, n + k)] = z.re;
                    }
                }
                s
            }
        }
    }
}

/// Real coordinates of `x`: `vec(Re X)` followed by `vec(Im X)` for complex fields.
pub fn to_real_coords(x: &Matrix) -> Vec<f64> {
    let entries = x.entries();
    match x.field() {
        Field::Real => entries.iter().map(|z| z.re).collect(),
        Field::Complex => entries
            .iter()
            .map(|z| z.re)
            .chain(entries.iter().map(|z| z.im))
            .collect(),
    }
}

/// Inverse of [`to_real_coords`].
pub fn from_real_coords(field: Field, shape: (usize, usize), coords: &[f64]) -> Matrix {
    let n = shape.0 * shape.1;
    let entries: Vec<Complex64> = match field {
        Field::Real => coords.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        Field::Complex => (0..n).map(|k| Complex64::new(coords[k], coords[n + k])).collect(),
    };
    Matrix::unvectorize(field, shape.0, shape.1, &entries)
}

/// Measurement vector `b`, serialized as `{"field", "values"}` with complex
/// values written as `[re, im]` pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct Measurements {
    pub field: Field,
    pub values: Vec<Complex64>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Value {
    Real(f64),
    Complex([f64; 2]),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeasurementsDoc {
    field: Field,
    values: Vec<Value>,
}

impl Serialize for Measurements {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let values = self
            .values
            .iter()
            .map(|z| match self.field {
                Field::Real => Value::Real(z.re),
                Field::Complex => Value::Complex([z.re, z.im]),
            })
            .collect();
        MeasurementsDoc {
            field: self.field,
            values,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Measurements {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let doc = MeasurementsDoc::deserialize(deserializer)?;
        let mut values = Vec::with_capacity(doc.values.len());
        for (k, v) in doc.values.into_iter().enumerate() {
            match (doc.field, v) {
                (Field::Real, Value::Real(x)) => values.push(Complex64::new(x, 0.0)),
                (Field::Complex, Value::Complex([re, im])) => values.push(Complex64::new(re, im)),
                (field, _) => {
                    return Err(D::Error::custom(format!(
                        "value {k} does not match the declared {field} field"
                    )))
                }
            }
        }
        Ok(Measurements {
            field: doc.field,
            values,
        })
    }
}

impl Measurements {
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Real coordinates matching the rows of [`MeasurementOperator::real_system`].
    pub fn to_real_coords(&self) -> Vec<f64> {
        match self.field {
            Field::Real => self.values.iter().map(|z| z.re).collect(),
            Field::Complex => self.values.iter().flat_map(|z| [z.re, z.im]).collect(),
        }
    }
}

/// `b = A(X)`.
pub fn apply(op: &MeasurementOperator, x: &Matrix) -> Result<Measurements> {
    op.check_input(x)?;
    let values = op.measurements.iter().map(|a| a.inner_product(x)).collect();
    Ok(Measurements {
        field: op.field,
        values,
    })
}

/// Real-orthonormal basis of the kernel of a measurement operator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NullSpaceBasis {
    pub shape: (usize, usize),
    pub field: Field,
    pub directions: Vec<Matrix>,
}

impl NullSpaceBasis {
    pub fn dimension(&self) -> usize {
        self.directions.len()
    }

    /// `sum_i coeffs[i] * N_i`.
    pub fn combine(&self, coeffs: &[f64]) -> Matrix {
        assert_eq!(coeffs.len(), self.directions.len());
        let mut out = Matrix::zeros(self.field, self.shape.0, self.shape.1);
        for (c, n) in coeffs.iter().zip(&self.directions) {
            out = &out + &n.scale(*c);
        }
        out
    }

    /// Real inner products `Re<N_i, m>`.
    pub fn coordinates(&self, m: &Matrix) -> Vec<f64> {
        self.directions.iter().map(|n| n.real_inner(m)).collect()
    }
}

/// Orthonormal basis of `{W : A(W) = 0}` from the right singular vectors of
/// the stacked real system.
pub fn null_space_basis(op: &MeasurementOperator) -> Result<NullSpaceBasis> {
    let dim = op.real_dimension();
    let system = op.real_system();
    let (rank, v) = if system.nrows() == 0 {
        (0, Matrix::identity(Field::Real, dim))
    } else {
        let f = matcore::svd(&Matrix::from_real_matrix(&system))?;
        (f.rank(), f.v)
    };
    let directions = (rank..dim)
        .map(|j| {
            let coords: Vec<f64> = (0..dim).map(|i| v.re(i, j)).collect();
            from_real_coords(op.field, op.shape, &coords)
        })
        .collect();
    Ok(NullSpaceBasis {
        shape: op.shape,
        field: op.field,
        directions,
    })
}

/// An operator whose null space is exactly the span of `directions` (complex
/// span for complex fields). The measurements are an orthonormal basis of the
/// orthogonal complement.
pub fn operator_with_null_span(directions: &[Matrix]) -> Result<MeasurementOperator> {
    let first = directions
        .first()
        .ok_or_else(|| Error::Precondition("at least one null direction is required".into()))?;
    let shape = first.shape();
    let field = first.field();
    for (i, d) in directions.iter().enumerate() {
        if d.shape() != shape {
            return Err(Error::Shape(format!(
                "direction {i} is {:?}, direction 0 is {shape:?}",
                d.shape()
            )));
        }
        if d.field() != field {
            return Err(Error::FieldMismatch(format!(
                "direction {i} is {}, direction 0 is {field}",
                d.field()
            )));
        }
    }
    let n = shape.0 * shape.1;
    let k = directions.len();
    let stacked = DMatrix::from_fn(n, k, |i, j| directions[j].vectorize()[i]);
    let stacked = match field {
        Field::Real => Matrix::from_real_matrix(&stacked.map(|z| z.re)),
        Field::Complex => Matrix::from_complex_matrix(stacked),
    };
    let f = matcore::svd(&stacked)?;
    if f.rank() != k {
        return Err(Error::Precondition(format!(
            "null directions are linearly dependent (rank {} of {k})",
            f.rank()
        )));
    }
    let complement = matcore::orthonormal_completion(&f.u_leading(k))?;
    let measurements = (0..complement.cols())
        .map(|j| {
            let col: Vec<Complex64> = complement.column_vec(j).iter().copied().collect();
            Matrix::unvectorize(field, shape.0, shape.1, &col)
        })
        .collect();
    MeasurementOperator::new(shape, field, measurements)
}

/// `m` measurement matrices with i.i.d. standard normal entries.
pub fn gaussian_operator(shape: (usize, usize), m: usize, seed: u64) -> Result<MeasurementOperator> {
    if m == 0 {
        return Err(Error::Precondition(
            "a gaussian operator needs at least one measurement".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let measurements = (0..m)
        .map(|_| random::gaussian(Field::Real, shape.0, shape.1, &mut rng))
        .collect();
    MeasurementOperator::new(shape, Field::Real, measurements)
}
