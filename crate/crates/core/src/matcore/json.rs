//! Matrix JSON format: `{"rows", "cols", "field", "data"}` with row-major
//! data; real entries are numbers, complex entries `[re, im]` pairs.

use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::matrix::{Field, Matrix};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixDoc {
    rows: usize,
    cols: usize,
    field: Field,
    data: Vec<Entry>,
}

impl Serialize for Matrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let data = self
            .entries()
            .into_iter()
            .map(|z| match self.field() {
                Field::Real => Entry::Real(z.re),
                Field::Complex => Entry::Complex([z.re, z.im]),
            })
            .collect();
        MatrixDoc {
            rows: self.rows(),
            cols: self.cols(),
            field: self.field(),
            data,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Matrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let doc = MatrixDoc::deserialize(deserializer)?;
        from_doc(doc).map_err(D::Error::custom)
    }
}

fn from_doc(doc: MatrixDoc) -> Result<Matrix> {
    let expected = doc.rows * doc.cols;
    if doc.data.len() != expected {
        return Err(Error::Parse(format!(
            "matrix declares {}x{} but carries {} entries",
            doc.rows,
            doc.cols,
            doc.data.len()
        )));
    }
    match doc.field {
        Field::Real => {
            let mut values = Vec::with_capacity(expected);
            for (k, e) in doc.data.into_iter().enumerate() {
                match e {
                    Entry::Real(x) => values.push(x),
                    Entry::Complex(_) => {
                        return Err(Error::Parse(format!("entry {k} of a real matrix is a [re, im] pair")))
                    }
                }
            }
            Matrix::real(doc.rows, doc.cols, &values)
        }
        Field::Complex => {
            let mut values = Vec::with_capacity(expected);
            for (k, e) in doc.data.into_iter().enumerate() {
                match e {
                    Entry::Complex([re, im]) => values.push(Complex64::new(re, im)),
                    Entry::Real(_) => {
                        return Err(Error::Parse(format!(
                            "entry {k} of a complex matrix must be a [re, im] pair"
                        )))
                    }
                }
            }
            Matrix::complex(doc.rows, doc.cols, &values)
        }
    }
}

pub fn matrix_from_json(text: &str) -> Result<Matrix> {
    let doc: MatrixDoc = serde_json::from_str(text)?;
    from_doc(doc)
}

pub fn matrix_to_json(m: &Matrix) -> String {
    serde_json::to_string_pretty(m).expect("matrix serialization is infallible")
}
