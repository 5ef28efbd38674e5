//! Dense complex linear algebra and quantum-state primitives.
//!
//! Matrices are `nalgebra::DMatrix<Complex64>`; the state newtypes in
//! [`state`] carry the physical invariants (unit norm, Hermitian PSD unit
//! trace, unitarity) on top of them. All indices are 0-based and tensor
//! products use the usual big-endian ordering, so `|i⟩⊗|k⟩` sits at row
//! `i·d_b + k`.

mod json;
pub mod random;
mod schmidt;
mod state;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub use json::{MatrixJson, StateJson};
pub use random::{haar_random_state, haar_random_unitary, random_density_matrix, stream_rng};
pub(crate) use schmidt::schmidt_weights_of_matrix;
pub use schmidt::{schmidt_decompose, SchmidtDecomposition};
pub use state::{DensityOperator, StateVector, UnitaryOperator};

use crate::error::{dim_mismatch, Result};

pub type ComplexMatrix = DMatrix<Complex64>;
pub type ComplexVector = DVector<Complex64>;

/// Hermiticity tolerance, entrywise on `M − M†`.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Trace tolerance for density operators.
pub const TRACE_TOL: f64 = 1e-12;
/// Smallest admissible eigenvalue of a density operator.
pub const PSD_TOL: f64 = -1e-10;
/// Unitarity tolerance on `max |UU† − I|`.
pub const UNITARY_TOL: f64 = 1e-12;
/// Norm tolerance for state vectors.
pub const NORM_TOL: f64 = 1e-12;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Kronecker product, `(a⊗b)[(i·rb+k),(j·cb+l)] = a[i,j]·b[k,l]`.
pub fn tensor(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// Largest entrywise modulus of `a − b`. Panics on shape mismatch.
pub fn max_abs_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "max_abs_diff on different shapes");
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Largest entrywise modulus.
pub fn max_abs(a: &ComplexMatrix) -> f64 {
    a.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

/// `max |M − M†|` entrywise.
pub fn hermiticity_defect(m: &ComplexMatrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    max_abs_diff(m, &m.adjoint())
}

/// `max |M M† − I|` entrywise.
pub fn unitarity_defect(m: &ComplexMatrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    let n = m.nrows();
    max_abs_diff(&(m * m.adjoint()), &ComplexMatrix::identity(n, n))
}

/// Identity matrix of side `n`.
pub fn identity(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

/// Trace of `a·b` without forming the product.
pub fn trace_of_product(a: &ComplexMatrix, b: &ComplexMatrix) -> Complex64 {
    assert_eq!(a.ncols(), b.nrows());
    assert_eq!(a.nrows(), b.ncols());
    let mut acc = ZERO;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// Partial trace of a bipartite operator given as a raw matrix.
///
/// `dims = [d0, d1]` must factor the side of `m`; `keep` selects the
/// surviving subsystem.
pub fn partial_trace_matrix(m: &ComplexMatrix, dims: [usize; 2], keep: usize) -> Result<ComplexMatrix> {
    let [d0, d1] = dims;
    if !m.is_square() || d0 * d1 != m.nrows() {
        return Err(dim_mismatch(format!(
            "dims {d0}x{d1} do not factor a {}x{} operator",
            m.nrows(),
            m.ncols()
        )));
    }
    match keep {
        0 => Ok(ComplexMatrix::from_fn(d0, d0, |i, j| {
            (0..d1).map(|k| m[(i * d1 + k, j * d1 + k)]).sum()
        })),
        1 => Ok(ComplexMatrix::from_fn(d1, d1, |k, l| {
            (0..d0).map(|i| m[(i * d1 + k, i * d1 + l)]).sum()
        })),
        other => Err(dim_mismatch(format!("keep index {other} for a bipartite operator"))),
    }
}

/// Partial trace keeping subsystem `keep` of a two-party density operator.
pub fn partial_trace(op: &DensityOperator, keep: usize) -> Result<DensityOperator> {
    let dims = op.dims();
    if dims.len() != 2 {
        return Err(dim_mismatch(format!("partial trace needs 2 subsystems, got {}", dims.len())));
    }
    let reduced = partial_trace_matrix(op.matrix(), [dims[0], dims[1]], keep)?;
    let kept = dims[keep];
    Ok(DensityOperator::from_parts_unchecked(reduced, vec![kept]))
}

/// `(1/√n) Σ_i |ii⟩` as a raw vector.
pub fn max_entangled_vector(n: usize) -> ComplexVector {
    let amp = Complex64::new(1.0 / (n as f64).sqrt(), 0.0);
    let mut v = ComplexVector::zeros(n * n);
    for i in 0..n {
        v[i * n + i] = amp;
    }
    v
}

/// `⟨v|M|v⟩` for a column vector `v`.
pub fn expectation(m: &ComplexMatrix, v: &ComplexVector) -> Complex64 {
    let mv = m * v;
    v.iter().zip(mv.iter()).map(|(a, b)| a.conj() * b).sum()
}

/// Closest unitary in Frobenius norm (polar factor), used to scrub
/// accumulated roundoff from long products of unitaries.
pub fn polar_unitary(m: &ComplexMatrix) -> ComplexMatrix {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("svd computed u");
    let v_t = svd.v_t.expect("svd computed v_t");
    u * v_t
}

/// `exp(iH)` for Hermitian `H`, through its eigendecomposition.
pub fn expm_i_hermitian(h: &ComplexMatrix) -> ComplexMatrix {
    let eig = nalgebra::SymmetricEigen::new(h.clone());
    let v = &eig.eigenvectors;
    let phases = ComplexVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| Complex64::from_polar(1.0, l)),
    );
    let mut scaled = v.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= phases[j];
    }
    scaled * v.adjoint()
}
