//! Repo-wide JSON layout for matrices and states: `rows`, `cols`, and
//! row-major `re`/`im` arrays. Density operators add `dims`; state vectors
//! are single-column matrices. serde_json prints shortest round-trip
//! decimals, so values survive a write/read cycle bit for bit.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{ComplexMatrix, ComplexVector, DensityOperator, StateVector, UnitaryOperator};
use crate::error::{QtpError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl MatrixJson {
    pub fn from_matrix(m: &ComplexMatrix) -> Self {
        let (rows, cols) = m.shape();
        let mut re = Vec::with_capacity(rows * cols);
        let mut im = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                re.push(m[(i, j)].re);
                im.push(m[(i, j)].im);
            }
        }
        Self { rows, cols, re, im }
    }

    pub fn to_matrix(&self) -> Result<ComplexMatrix> {
        let len = self.rows * self.cols;
        if self.re.len() != len || self.im.len() != len {
            return Err(QtpError::Parse(format!(
                "matrix {}x{} needs {len} entries, got re={} im={}",
                self.rows,
                self.cols,
                self.re.len(),
                self.im.len()
            )));
        }
        if self.re.iter().chain(&self.im).any(|x| !x.is_finite()) {
            return Err(QtpError::Parse("non-finite matrix entry".into()));
        }
        Ok(ComplexMatrix::from_fn(self.rows, self.cols, |i, j| {
            let k = i * self.cols + j;
            Complex64::new(self.re[k], self.im[k])
        }))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct DensityJson {
    #[serde(flatten)]
    matrix: MatrixJson,
    dims: Vec<usize>,
}

/// A state vector serialized as a `dim × 1` matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateJson {
    #[serde(flatten)]
    pub matrix: MatrixJson,
}

impl TryFrom<MatrixJson> for UnitaryOperator {
    type Error = QtpError;
    fn try_from(value: MatrixJson) -> Result<Self> {
        UnitaryOperator::new(value.to_matrix()?)
    }
}

impl From<UnitaryOperator> for MatrixJson {
    fn from(u: UnitaryOperator) -> Self {
        MatrixJson::from_matrix(u.matrix())
    }
}

impl TryFrom<DensityJson> for DensityOperator {
    type Error = QtpError;
    fn try_from(value: DensityJson) -> Result<Self> {
        DensityOperator::new(value.matrix.to_matrix()?, value.dims)
    }
}

impl From<DensityOperator> for DensityJson {
    fn from(rho: DensityOperator) -> Self {
        DensityJson { matrix: MatrixJson::from_matrix(rho.matrix()), dims: rho.dims().to_vec() }
    }
}

impl TryFrom<StateJson> for StateVector {
    type Error = QtpError;
    fn try_from(value: StateJson) -> Result<Self> {
        if value.matrix.cols != 1 {
            return Err(QtpError::Parse(format!("state must have one column, got {}", value.matrix.cols)));
        }
        let m = value.matrix.to_matrix()?;
        StateVector::new(ComplexVector::from_iterator(m.nrows(), m.iter().copied()))
    }
}

impl From<StateVector> for StateJson {
    fn from(s: StateVector) -> Self {
        let v = s.into_amplitudes();
        let m = ComplexMatrix::from_column_slice(v.len(), 1, v.as_slice());
        StateJson { matrix: MatrixJson::from_matrix(&m) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random_density_matrix;
    use proptest::prelude::*;

    #[test]
    fn row_major_layout() {
        let m = ComplexMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(1.0, 0.0),
                Complex64::new(2.0, 0.5),
                Complex64::new(3.0, 0.0),
                Complex64::new(4.0, -1.0),
            ],
        );
        let j = MatrixJson::from_matrix(&m);
        assert_eq!(j.re, vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(j.im, vec![0.0, 0.5, 0.0, -1.0]);
    }

    #[test]
    fn rejects_short_arrays() {
        let j = MatrixJson { rows: 2, cols: 2, re: vec![1.0; 3], im: vec![0.0; 4] };
        assert!(j.to_matrix().is_err());
    }

    proptest! {
        #[test]
        fn density_json_round_trip_is_bit_exact(seed in any::<u64>(), n in 2usize..4) {
            let rho = random_density_matrix(&[n, n], seed);
            let text = serde_json::to_string(&rho).unwrap();
            let back: DensityOperator = serde_json::from_str(&text).unwrap();
            prop_assert_eq!(&back, &rho);
            prop_assert_eq!(serde_json::to_string(&back).unwrap(), text);
        }
    }
}
