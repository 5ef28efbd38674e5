use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::json::{DensityJson, MatrixJson, StateJson};
use super::{
    hermiticity_defect, identity, unitarity_defect, ComplexMatrix, ComplexVector, HERMITIAN_TOL, NORM_TOL,
    PSD_TOL, TRACE_TOL, UNITARY_TOL, ZERO,
};
use crate::error::{dim_mismatch, QtpError, Result};

/// Unit-norm pure state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StateJson", into = "StateJson")]
pub struct StateVector {
    amplitudes: ComplexVector,
}

impl StateVector {
    /// Wraps `amplitudes`, which must already be normalized to within `1e-12`.
    pub fn new(amplitudes: ComplexVector) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(QtpError::InvalidState("empty amplitude vector".into()));
        }
        if amplitudes.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(QtpError::InvalidState("non-finite amplitude".into()));
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(QtpError::InvalidState(format!("state norm {norm} differs from 1")));
        }
        Ok(Self { amplitudes })
    }

    /// Normalizes `amplitudes`, returning the state and the original norm.
    pub fn normalized(amplitudes: ComplexVector) -> Result<(Self, f64)> {
        let norm = amplitudes.norm();
        if !norm.is_finite() || norm == 0.0 {
            return Err(QtpError::InvalidState("cannot normalize a zero or non-finite vector".into()));
        }
        let state = Self::new(amplitudes.unscale(norm))?;
        Ok((state, norm))
    }

    pub fn from_slice(amplitudes: &[Complex64]) -> Result<Self> {
        Self::new(ComplexVector::from_column_slice(amplitudes))
    }

    /// Computational basis state `|k⟩` in dimension `dim`.
    pub fn basis(dim: usize, k: usize) -> Result<Self> {
        if k >= dim {
            return Err(QtpError::IndexOutOfRange { index: k, bound: dim });
        }
        let mut v = ComplexVector::zeros(dim);
        v[k] = Complex64::new(1.0, 0.0);
        Ok(Self { amplitudes: v })
    }

    pub(crate) fn from_vector_unchecked(amplitudes: ComplexVector) -> Self {
        Self { amplitudes }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &ComplexVector {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> ComplexVector {
        self.amplitudes
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn projector(&self) -> ComplexMatrix {
        &self.amplitudes * self.amplitudes.adjoint()
    }

    /// Pure density operator with subsystem dimensions `dims`.
    pub fn to_density(&self, dims: Vec<usize>) -> Result<DensityOperator> {
        check_dims(&dims, self.dim())?;
        Ok(DensityOperator { matrix: self.projector(), dims })
    }
}

fn check_dims(dims: &[usize], side: usize) -> Result<()> {
    if dims.is_empty() || dims.contains(&0) {
        return Err(dim_mismatch(format!("invalid subsystem dims {dims:?}")));
    }
    if dims.iter().product::<usize>() != side {
        return Err(dim_mismatch(format!("dims {dims:?} do not factor side {side}")));
    }
    Ok(())
}

/// Hermitian, positive-semidefinite, unit-trace operator together with its
/// subsystem dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DensityJson", into = "DensityJson")]
pub struct DensityOperator {
    matrix: ComplexMatrix,
    dims: Vec<usize>,
}

impl DensityOperator {
    /// Validates Hermiticity (`1e-12`), trace (`1e-12`) and the smallest
    /// eigenvalue (`≥ −1e-10`).
    pub fn new(matrix: ComplexMatrix, dims: Vec<usize>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(dim_mismatch(format!("density matrix is {}x{}", matrix.nrows(), matrix.ncols())));
        }
        check_dims(&dims, matrix.nrows())?;
        if matrix.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(QtpError::InvalidState("non-finite matrix entry".into()));
        }
        let herm = hermiticity_defect(&matrix);
        if herm > HERMITIAN_TOL {
            return Err(QtpError::InvalidState(format!("not Hermitian (defect {herm:.3e})")));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(QtpError::InvalidState(format!("trace {tr} differs from 1")));
        }
        let out = Self { matrix, dims };
        let min_eig = out.min_eigenvalue();
        if min_eig < PSD_TOL {
            return Err(QtpError::InvalidState(format!("negative eigenvalue {min_eig:.3e}")));
        }
        Ok(out)
    }

    /// Skips validation; used for channel outputs whose defects are
    /// reported separately.
    pub(crate) fn from_parts_unchecked(matrix: ComplexMatrix, dims: Vec<usize>) -> Self {
        Self { matrix, dims }
    }

    /// `I/d` on the given subsystems.
    pub fn maximally_mixed(dims: Vec<usize>) -> Result<Self> {
        let side = dims.iter().product::<usize>();
        check_dims(&dims, side)?;
        let m = identity(side).unscale(side as f64);
        Ok(Self { matrix: m, dims })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn side(&self) -> usize {
        self.matrix.nrows()
    }

    /// Side `n` of a symmetric bipartite `n⊗n` operator.
    pub fn bipartite_side(&self) -> Result<usize> {
        match self.dims.as_slice() {
            [a, b] if a == b => Ok(*a),
            other => Err(dim_mismatch(format!("expected an n⊗n resource, got dims {other:?}"))),
        }
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    /// Ascending eigenvalues of the Hermitian part.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let herm = (&self.matrix + self.matrix.adjoint()).scale(0.5);
        let mut vals: Vec<f64> = nalgebra::SymmetricEigen::new(herm).eigenvalues.iter().copied().collect();
        vals.sort_by(|a, b| a.total_cmp(b));
        vals
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    /// `tr(ρσ)`, the overlap used to compare channel input and output.
    pub fn overlap(&self, other: &DensityOperator) -> Result<f64> {
        if self.side() != other.side() {
            return Err(dim_mismatch("overlap between operators of different sides"));
        }
        Ok(super::trace_of_product(&self.matrix, &other.matrix).re)
    }

    /// Convex combination `Σ w_k ρ_k`; all inputs must share dims.
    pub fn mixture(terms: &[(f64, &DensityOperator)]) -> Result<Self> {
        let first = terms
            .first()
            .ok_or_else(|| QtpError::InvalidParameter("empty mixture".into()))?
            .1;
        let mut m = ComplexMatrix::from_element(first.side(), first.side(), ZERO);
        for (w, rho) in terms {
            if rho.dims != first.dims {
                return Err(dim_mismatch("mixture members have different dims"));
            }
            m += rho.matrix.scale(*w);
        }
        Self::new(m, first.dims.clone())
    }
}

/// Square matrix with `max |UU† − I| ≤ 1e-12`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixJson", into = "MatrixJson")]
pub struct UnitaryOperator {
    matrix: ComplexMatrix,
}

impl UnitaryOperator {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        Self::with_tolerance(matrix, UNITARY_TOL)
    }

    pub fn with_tolerance(matrix: ComplexMatrix, tol: f64) -> Result<Self> {
        let defect = unitarity_defect(&matrix);
        if !(defect <= tol) {
            return Err(QtpError::NotUnitary { defect });
        }
        Ok(Self { matrix })
    }

    pub(crate) fn from_matrix_unchecked(matrix: ComplexMatrix) -> Self {
        Self { matrix }
    }

    pub fn identity(n: usize) -> Self {
        Self { matrix: identity(n) }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn dagger(&self) -> Self {
        Self { matrix: self.matrix.adjoint() }
    }

    pub fn compose(&self, other: &UnitaryOperator) -> Self {
        Self { matrix: &self.matrix * &other.matrix }
    }

    pub fn defect(&self) -> f64 {
        unitarity_defect(&self.matrix)
    }

    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        if psi.dim() != self.dim() {
            return Err(dim_mismatch("unitary and state dimensions differ"));
        }
        Ok(StateVector::from_vector_unchecked(&self.matrix * psi.amplitudes()))
    }
}

impl From<UnitaryOperator> for ComplexMatrix {
    fn from(u: UnitaryOperator) -> Self {
        u.matrix
    }
}
