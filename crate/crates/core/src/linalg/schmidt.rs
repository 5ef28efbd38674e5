use super::{ComplexMatrix, ComplexVector, StateVector};
use crate::error::{dim_mismatch, Result};

/// `|ψ⟩ = Σ_i c_i |l_i⟩|r_i⟩` with `c` descending. Columns of `left`/`right`
/// hold the Schmidt vectors.
#[derive(Debug, Clone)]
pub struct SchmidtDecomposition {
    pub coefficients: Vec<f64>,
    pub left: ComplexMatrix,
    pub right: ComplexMatrix,
}

impl SchmidtDecomposition {
    /// Squared coefficients.
    pub fn weights(&self) -> Vec<f64> {
        self.coefficients.iter().map(|c| c * c).collect()
    }

    pub fn reconstruct(&self) -> ComplexVector {
        let (n2, n3) = (self.left.nrows(), self.right.nrows());
        let mut v = ComplexVector::zeros(n2 * n3);
        for (k, &c) in self.coefficients.iter().enumerate() {
            for i in 0..n2 {
                for j in 0..n3 {
                    v[i * n3 + j] += self.left[(i, k)] * self.right[(j, k)] * c;
                }
            }
        }
        v
    }
}

/// Schmidt decomposition of `psi` over `H_{n2} ⊗ H_{n3}` via the SVD of the
/// reshaped `n2 × n3` coefficient matrix.
pub fn schmidt_decompose(psi: &StateVector, dims: (usize, usize)) -> Result<SchmidtDecomposition> {
    let (n2, n3) = dims;
    if n2 * n3 != psi.dim() {
        return Err(dim_mismatch(format!("state of dim {} cannot split as {n2}x{n3}", psi.dim())));
    }
    let amps = psi.amplitudes();
    let m = ComplexMatrix::from_fn(n2, n3, |i, j| amps[i * n3 + j]);
    let svd = m.svd(true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let r = order.len();
    let coefficients = order.iter().map(|&k| svd.singular_values[k]).collect();
    let left = ComplexMatrix::from_fn(n2, r, |i, k| u[(i, order[k])]);
    // M = Σ σ u_k v_k†, so the right Schmidt vector is the k-th row of V†.
    let right = ComplexMatrix::from_fn(n3, r, |j, k| v_t[(order[k], j)]);
    Ok(SchmidtDecomposition { coefficients, left, right })
}

/// Schmidt weights `λ_i` of a coefficient matrix `A` (`|ψ⟩ = Σ a_ij |ij⟩`),
/// descending.
pub(crate) fn schmidt_weights_of_matrix(a: &ComplexMatrix) -> Vec<f64> {
    let mut s: Vec<f64> = a.clone().svd(false, false).singular_values.iter().map(|x| x * x).collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}
