//! Weyl–Heisenberg operator basis `U_st = h^t g^s` and the generalized Bell
//! basis `|Φ_st⟩ = (1⊗U_st)|Φ⟩`.
//!
//! `h` is the cyclic shift `h|j⟩ = |j+1 mod n⟩` and `g` the clock
//! `g|j⟩ = ω^j|j⟩` with `ω = exp(−2πi/n)`. Tables are indexed by `(s, t)` in
//! that order everywhere, flattened as `s·n + t`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{dim_mismatch, QtpError, Result};
use crate::linalg::{
    identity, max_abs_diff, max_entangled_vector, ComplexMatrix, ComplexVector, DensityOperator, StateVector,
    UnitaryOperator, ZERO,
};

/// `ω = exp(−2πi/n)`.
pub fn omega(n: usize) -> Complex64 {
    omega_pow(n, 1)
}

/// `ω^m` with the exponent reduced mod `n` before evaluation. Quarter turns
/// are returned exactly.
pub fn omega_pow(n: usize, m: i64) -> Complex64 {
    let n_i = n as i64;
    let r = m.rem_euclid(n_i);
    match (4 * r).checked_div(n_i) {
        _ if r == 0 => Complex64::new(1.0, 0.0),
        Some(q) if q * n_i == 4 * r => [Complex64::new(0.0, -1.0), Complex64::new(-1.0, 0.0), Complex64::new(0.0, 1.0)]
            [(q - 1) as usize],
        _ => Complex64::from_polar(1.0, -2.0 * PI * r as f64 / n as f64),
    }
}

fn clock_with(n: usize, w: impl Fn(i64) -> Complex64) -> ComplexMatrix {
    let mut g = ComplexMatrix::zeros(n, n);
    for j in 0..n {
        g[(j, j)] = w(j as i64);
    }
    g
}

fn shift(n: usize) -> ComplexMatrix {
    let mut h = ComplexMatrix::zeros(n, n);
    for j in 0..n {
        h[((j + 1) % n, j)] = Complex64::new(1.0, 0.0);
    }
    h
}

/// Cyclic shift `h` and clock `g` for dimension `n ≥ 2`.
pub fn shift_clock(n: usize) -> Result<(UnitaryOperator, UnitaryOperator)> {
    if n < 2 {
        return Err(QtpError::InvalidParameter(format!("Weyl basis needs n >= 2, got {n}")));
    }
    let h = UnitaryOperator::from_matrix_unchecked(shift(n));
    let g = UnitaryOperator::from_matrix_unchecked(clock_with(n, |j| omega_pow(n, j)));
    Ok((h, g))
}

/// Precomputed Weyl operators and Bell vectors for one dimension.
#[derive(Debug, Clone)]
pub struct WeylBasis {
    n: usize,
    omega: Complex64,
    ops: Vec<UnitaryOperator>,
    bells: Vec<StateVector>,
}

impl WeylBasis {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(QtpError::InvalidParameter(format!("Weyl basis needs n >= 2, got {n}")));
        }
        Ok(Self::build(n, |m| omega_pow(n, m)))
    }

    /// Basis whose clock uses `exp(+2πi/n)` instead of the fixed convention.
    /// Only meant as a negative control for the verification suite.
    #[doc(hidden)]
    pub fn with_flipped_omega(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(QtpError::InvalidParameter(format!("Weyl basis needs n >= 2, got {n}")));
        }
        Ok(Self::build(n, |m| omega_pow(n, m).conj()))
    }

    fn build(n: usize, w: impl Fn(i64) -> Complex64) -> Self {
        let mut ops = Vec::with_capacity(n * n);
        for s in 0..n {
            for t in 0..n {
                // U_st |j⟩ = ω^{sj} |j+t⟩
                let mut u = ComplexMatrix::zeros(n, n);
                for j in 0..n {
                    u[((j + t) % n, j)] = w((s * j) as i64);
                }
                ops.push(UnitaryOperator::from_matrix_unchecked(u));
            }
        }
        let phi = max_entangled_vector(n);
        let bells = ops
            .iter()
            .map(|u| {
                let full = crate::linalg::tensor(&identity(n), u.matrix());
                StateVector::from_vector_unchecked(full * &phi)
            })
            .collect();
        Self { n, omega: w(1), ops, bells }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// The `ω` this basis was built with.
    pub fn omega(&self) -> Complex64 {
        self.omega
    }

    pub fn index(&self, s: usize, t: usize) -> Result<usize> {
        let n = self.n;
        if s >= n {
            return Err(QtpError::IndexOutOfRange { index: s, bound: n });
        }
        if t >= n {
            return Err(QtpError::IndexOutOfRange { index: t, bound: n });
        }
        Ok(s * n + t)
    }

    /// `U_st = h^t g^s`.
    pub fn op(&self, s: usize, t: usize) -> Result<&UnitaryOperator> {
        Ok(&self.ops[self.index(s, t)?])
    }

    /// `|Φ_st⟩ = (1⊗U_st)|Φ⟩`.
    pub fn bell(&self, s: usize, t: usize) -> Result<&StateVector> {
        Ok(&self.bells[self.index(s, t)?])
    }

    /// All operators, flattened `s·n + t`.
    pub fn ops(&self) -> &[UnitaryOperator] {
        &self.ops
    }

    pub fn bells(&self) -> &[StateVector] {
        &self.bells
    }

    /// `(s, t)` pairs in table order.
    pub fn labels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |s| (0..self.n).map(move |t| (s, t)))
    }

    /// `n² × n²` matrix whose columns are the Bell vectors.
    pub fn bell_matrix(&self) -> ComplexMatrix {
        let d = self.n * self.n;
        ComplexMatrix::from_fn(d, d, |r, c| self.bells[c].amplitudes()[r])
    }
}

/// Free function form of [`WeylBasis::op`].
pub fn weyl_op(basis: &WeylBasis, s: usize, t: usize) -> Result<&UnitaryOperator> {
    basis.op(s, t)
}

/// Free function form of [`WeylBasis::bell`].
pub fn bell_state(basis: &WeylBasis, s: usize, t: usize) -> Result<&StateVector> {
    basis.bell(s, t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommutationReport {
    /// `max ‖U_st U_s't' − ω^{st'−ts'} U_s't' U_st‖_max` over all label pairs.
    pub max_deviation: f64,
    pub worst: ((usize, usize), (usize, usize)),
}

/// Checks `U_st U_s't' = ω^{st'−ts'} U_s't' U_st` with `ω = exp(−2πi/n)`
/// taken from the fixed convention, not from the basis under test.
pub fn commutation_check(basis: &WeylBasis) -> CommutationReport {
    let n = basis.n;
    let mut report = CommutationReport { max_deviation: 0.0, worst: ((0, 0), (0, 0)) };
    for (s, t) in basis.labels() {
        let a = basis.ops[s * n + t].matrix();
        for (s2, t2) in basis.labels() {
            let b = basis.ops[s2 * n + t2].matrix();
            let phase = omega_pow(n, (s * t2) as i64 - (t * s2) as i64);
            let dev = max_abs_diff(&(a * b), &((b * a) * phase));
            if dev > report.max_deviation {
                report = CommutationReport { max_deviation: dev, worst: ((s, t), (s2, t2)) };
            }
        }
    }
    report
}

/// Coefficients `c_st = tr(U_st† W)/n` of `W` in the Weyl basis.
#[derive(Debug, Clone, PartialEq)]
pub struct WeylCoefficients {
    pub n: usize,
    /// Flattened `s·n + t`.
    pub values: Vec<Complex64>,
}

impl WeylCoefficients {
    pub fn get(&self, s: usize, t: usize) -> Complex64 {
        self.values[s * self.n + t]
    }

    /// `Σ c_st U_st`.
    pub fn reconstruct(&self, basis: &WeylBasis) -> ComplexMatrix {
        let mut w = ComplexMatrix::zeros(self.n, self.n);
        for (c, u) in self.values.iter().zip(basis.ops()) {
            w += u.matrix() * *c;
        }
        w
    }
}

pub fn decompose_in_weyl(basis: &WeylBasis, w: &ComplexMatrix) -> Result<WeylCoefficients> {
    let n = basis.n;
    if w.shape() != (n, n) {
        return Err(dim_mismatch(format!("expected {n}x{n} matrix, got {}x{}", w.nrows(), w.ncols())));
    }
    let values = basis
        .ops()
        .iter()
        .map(|u| crate::linalg::trace_of_product(&u.matrix().adjoint(), w) / n as f64)
        .collect();
    Ok(WeylCoefficients { n, values })
}

/// Flip operator `P|ij⟩ = |ji⟩` on `n ⊗ n`.
pub fn flip_operator(n: usize) -> ComplexMatrix {
    let mut p = ComplexMatrix::zeros(n * n, n * n);
    for i in 0..n {
        for j in 0..n {
            p[(j * n + i, i * n + j)] = Complex64::new(1.0, 0.0);
        }
    }
    p
}

fn side_root(d: usize) -> Option<usize> {
    let n = (d as f64).sqrt().round() as usize;
    (n * n == d).then_some(n)
}

/// Haar twirl `∫ (U†⊗U†) σ (U⊗U) dU = α₁ I⊗I + α₂ P` in closed form.
pub fn twirl_closed_form(sigma: &ComplexMatrix) -> Result<ComplexMatrix> {
    if !sigma.is_square() {
        return Err(dim_mismatch("twirl input must be square"));
    }
    let n = side_root(sigma.nrows())
        .ok_or_else(|| dim_mismatch(format!("side {} is not n²", sigma.nrows())))?;
    if n < 2 {
        return Err(QtpError::InvalidParameter("twirl is undefined for n = 1".into()));
    }
    let p = flip_operator(n);
    let tr = sigma.trace();
    let tr_p = crate::linalg::trace_of_product(sigma, &p);
    let nf = n as f64;
    let denom = nf * nf * (nf * nf - 1.0);
    let alpha1 = (tr * (nf * nf) - tr_p * nf) / denom;
    let alpha2 = (tr_p * (nf * nf) - tr * nf) / denom;
    Ok(identity(n * n) * alpha1 + p * alpha2)
}

/// `M[(s,t),(s',t')] = ⟨Φ_st|χ|Φ_s't'⟩`, i.e. χ written in the Bell basis.
pub fn bell_overlap_matrix(basis: &WeylBasis, chi: &DensityOperator) -> Result<ComplexMatrix> {
    let n = chi.bipartite_side()?;
    if n != basis.n {
        return Err(dim_mismatch(format!("resource is {n}⊗{n}, basis has n = {}", basis.n)));
    }
    let b = basis.bell_matrix();
    Ok(b.adjoint() * chi.matrix() * b)
}

/// `Σ_{k=0}^{n−1} ω^{mk}`.
pub fn root_of_unity_sum(n: usize, m: i64) -> Complex64 {
    (0..n as i64).map(|k| omega_pow(n, m * k)).fold(ZERO, |a, b| a + b)
}

/// `Σ_st U_st A U_st†`.
pub fn weyl_average(basis: &WeylBasis, a: &ComplexMatrix) -> ComplexMatrix {
    basis
        .ops()
        .iter()
        .fold(ComplexMatrix::zeros(basis.n, basis.n), |acc, u| acc + u.matrix() * a * u.matrix().adjoint())
}

/// `Σ_st U_st† A U_st`.
pub fn weyl_average_adjoint(basis: &WeylBasis, a: &ComplexMatrix) -> ComplexMatrix {
    basis
        .ops()
        .iter()
        .fold(ComplexMatrix::zeros(basis.n, basis.n), |acc, u| acc + u.matrix().adjoint() * a * u.matrix())
}

/// Bell vectors as a raw column vector, convenient for overlaps.
pub(crate) fn bell_vector(basis: &WeylBasis, s: usize, t: usize) -> &ComplexVector {
    basis.bells[s * basis.n + t].amplitudes()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{haar_random_unitary, random_density_matrix, stream_rng};
    use rand::Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn textbook_x() -> ComplexMatrix {
        ComplexMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)])
    }

    fn textbook_z() -> ComplexMatrix {
        ComplexMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)])
    }

    fn mat_pow(m: &ComplexMatrix, k: usize) -> ComplexMatrix {
        (0..k).fold(identity(m.nrows()), |acc, _| acc * m)
    }

    #[test]
    fn qubit_shift_and_clock_are_x_and_z() {
        let (h, g) = shift_clock(2).unwrap();
        assert!(max_abs_diff(h.matrix(), &textbook_x()) < 1e-15);
        assert!(max_abs_diff(g.matrix(), &textbook_z()) < 1e-15);
        // Y = ZX, so hg = XZ = −Y
        let y = textbook_z() * textbook_x();
        assert!(max_abs_diff(&(h.matrix() * g.matrix()), &(-y)) < 1e-15);
    }

    #[test]
    fn shift_and_clock_have_order_n() {
        for n in 2..=6 {
            let (h, g) = shift_clock(n).unwrap();
            assert!(max_abs_diff(&mat_pow(h.matrix(), n), &identity(n)) < 1e-12);
            assert!(max_abs_diff(&mat_pow(g.matrix(), n), &identity(n)) < 1e-12);
        }
        assert!(shift_clock(1).is_err());
    }

    #[test]
    fn ops_are_powers_of_shift_and_clock() {
        for n in 2..=5 {
            let basis = WeylBasis::new(n).unwrap();
            let (h, g) = shift_clock(n).unwrap();
            for (s, t) in basis.labels() {
                let expect = mat_pow(h.matrix(), t) * mat_pow(g.matrix(), s);
                assert!(max_abs_diff(basis.op(s, t).unwrap().matrix(), &expect) < 1e-12);
            }
        }
    }

    #[test]
    fn qubit_table_is_i_x_z_xz() {
        let b = WeylBasis::new(2).unwrap();
        assert!(max_abs_diff(b.op(0, 0).unwrap().matrix(), &identity(2)) < 1e-15);
        assert!(max_abs_diff(b.op(0, 1).unwrap().matrix(), &textbook_x()) < 1e-15);
        assert!(max_abs_diff(b.op(1, 0).unwrap().matrix(), &textbook_z()) < 1e-15);
        assert!(max_abs_diff(b.op(1, 1).unwrap().matrix(), &(textbook_x() * textbook_z())) < 1e-15);
    }

    #[test]
    fn out_of_range_labels() {
        let b = WeylBasis::new(3).unwrap();
        assert!(matches!(b.op(3, 0), Err(QtpError::IndexOutOfRange { index: 3, bound: 3 })));
        assert!(b.bell(0, 5).is_err());
    }

    #[test]
    fn trace_orthogonality_and_traces() {
        for n in 2..=5 {
            let b = WeylBasis::new(n).unwrap();
            for (s, t) in b.labels() {
                let u = b.op(s, t).unwrap().matrix();
                let tr = u.trace();
                let expect = if s == 0 && t == 0 { n as f64 } else { 0.0 };
                assert!((tr - c(expect, 0.0)).norm() < 1e-12);
                for (s2, t2) in b.labels() {
                    let v = b.op(s2, t2).unwrap().matrix();
                    let ip = (u * v.adjoint()).trace();
                    let expect = if (s, t) == (s2, t2) { n as f64 } else { 0.0 };
                    assert!((ip - c(expect, 0.0)).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn commutation_relation_holds() {
        for n in 2..=5 {
            let r = commutation_check(&WeylBasis::new(n).unwrap());
            assert!(r.max_deviation <= 1e-12, "n={n}: {r:?}");
        }
    }

    #[test]
    fn flipped_omega_fails_commutation_for_n_at_least_3() {
        for n in 3..=5 {
            let r = commutation_check(&WeylBasis::with_flipped_omega(n).unwrap());
            assert!(r.max_deviation > 0.1, "n={n}");
        }
        // for n = 2 the two conventions coincide
        let r = commutation_check(&WeylBasis::with_flipped_omega(2).unwrap());
        assert!(r.max_deviation <= 1e-12);
    }

    #[test]
    fn bell_states() {
        let b = WeylBasis::new(2).unwrap();
        let r = 1.0 / 2f64.sqrt();
        let epr = b.bell(0, 0).unwrap().amplitudes();
        assert!((epr[0] - c(r, 0.)).norm() < 1e-15 && (epr[3] - c(r, 0.)).norm() < 1e-15);
        let psi = b.bell(0, 1).unwrap().amplitudes();
        assert!((psi[1] - c(r, 0.)).norm() < 1e-15 && (psi[2] - c(r, 0.)).norm() < 1e-15);
        for n in 2..=5 {
            let b = WeylBasis::new(n).unwrap();
            let m = b.bell_matrix();
            let gram = m.adjoint() * &m;
            assert!(max_abs_diff(&gram, &identity(n * n)) < 1e-12);
        }
    }

    #[test]
    fn decomposition_round_trip() {
        let b = WeylBasis::new(4).unwrap();
        let id = decompose_in_weyl(&b, &identity(4)).unwrap();
        assert!((id.get(0, 0) - c(1., 0.)).norm() < 1e-15);
        assert!(id.values.iter().skip(1).all(|v| v.norm() < 1e-15));

        let one_hot = decompose_in_weyl(&b, b.op(2, 3).unwrap().matrix()).unwrap();
        for (s, t) in b.labels() {
            let expect = if (s, t) == (2, 3) { 1.0 } else { 0.0 };
            assert!((one_hot.get(s, t) - c(expect, 0.)).norm() < 1e-14);
        }

        let mut rng = stream_rng(3, 0);
        let w = ComplexMatrix::from_fn(4, 4, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let coeffs = decompose_in_weyl(&b, &w).unwrap();
        assert!(max_abs_diff(&coeffs.reconstruct(&b), &w) < 1e-12);
        assert!(decompose_in_weyl(&b, &identity(3)).is_err());
    }

    #[test]
    fn completeness_identities() {
        for n in 2..=5 {
            let b = WeylBasis::new(n).unwrap();
            let rho = random_density_matrix(&[n], 10 + n as u64);
            let lhs = weyl_average(&b, rho.matrix());
            assert!(max_abs_diff(&lhs, &(identity(n) * c(n as f64, 0.))) < 1e-12);

            let mut rng = stream_rng(n as u64, 1);
            let a = ComplexMatrix::from_fn(n, n, |_, _| c(rng.random::<f64>(), rng.random::<f64>() - 0.3));
            let lhs = weyl_average_adjoint(&b, &a);
            assert!(max_abs_diff(&lhs, &(identity(n) * (a.trace() * n as f64))) < 1e-12);
        }
    }

    #[test]
    fn roots_of_unity_sum() {
        for n in 2..=6 {
            for m in -7i64..=7 {
                let expect = if m.rem_euclid(n as i64) == 0 { n as f64 } else { 0.0 };
                assert!((root_of_unity_sum(n, m) - c(expect, 0.)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn twirl_fixed_points() {
        for n in 2..=4 {
            let ii = identity(n * n);
            assert!(max_abs_diff(&twirl_closed_form(&ii).unwrap(), &ii) < 1e-12);
            let p = flip_operator(n);
            assert!(max_abs_diff(&twirl_closed_form(&p).unwrap(), &p) < 1e-12);
        }
        assert!(twirl_closed_form(&identity(1)).is_err());
        assert!(twirl_closed_form(&identity(5)).is_err());
    }

    #[test]
    fn twirl_is_invariant_under_local_unitaries() {
        let sigma = random_density_matrix(&[3, 3], 4);
        let tw = twirl_closed_form(sigma.matrix()).unwrap();
        let u = haar_random_unitary(3, 8);
        let uu = crate::linalg::tensor(u.matrix(), u.matrix());
        let rotated = uu.adjoint() * sigma.matrix() * &uu;
        assert!(max_abs_diff(&twirl_closed_form(&rotated).unwrap(), &tw) < 1e-12);
    }

    #[test]
    fn overlap_matrix_of_bell_projector() {
        let b = WeylBasis::new(3).unwrap();
        let chi = b.bell(0, 0).unwrap().to_density(vec![3, 3]).unwrap();
        let m = bell_overlap_matrix(&b, &chi).unwrap();
        let mut expect = ComplexMatrix::zeros(9, 9);
        expect[(0, 0)] = c(1., 0.);
        assert!(max_abs_diff(&m, &expect) < 1e-14);
        let mixed = random_density_matrix(&[3, 3], 1);
        let m = bell_overlap_matrix(&b, &mixed).unwrap();
        assert!((m.trace() - c(1., 0.)).norm() < 1e-12);
        assert!(bell_overlap_matrix(&WeylBasis::new(2).unwrap(), &mixed).is_err());
    }
}
