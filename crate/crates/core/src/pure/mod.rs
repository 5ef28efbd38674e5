//! Pure-state teleportation built from the constraint equation on the
//! sender's unitary.
//!
//! Parties: the unknown state lives in `H1` (dimension `N1`), the resource
//! `|Ψ⟩ = Σ a_jk |jk⟩` in `H2 ⊗ H3` with `N3 = N1`. The sender applies
//! `U|ij⟩ = Σ_st b_ijst |st⟩` on `H1 ⊗ H2` and measures in the computational
//! basis. Solving
//!
//! `Σ_j a_jk b_ijst = δ_{i, e(p−t)} c_{s,i,t} / √(N1·m)` for `k = e(p)`
//!
//! leaves the receiver with `Σ_p c_{s,e(p),t} α_{e(p)} |e(p+t)⟩`, undone by a
//! shift and a diagonal of conjugated phases. Here `e` lists the support
//! columns of `A` and `m` is its size; indices are 0-based and every cyclic
//! offset is taken mod `m` (mod `N1` for a full-support resource).

mod phase;

pub use phase::PhaseTable;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{dim_mismatch, QtpError, Result};
use crate::linalg::{identity, max_abs_diff, ComplexMatrix, ComplexVector, StateVector, UnitaryOperator, ONE, ZERO};
use crate::linalg::{schmidt_weights_of_matrix, NORM_TOL, UNITARY_TOL};

/// Entries below this modulus count as structural zeros of `A`.
const ZERO_AMPLITUDE: f64 = 1e-13;
/// Tolerance on `|λ_i − 1/N|`.
const WEIGHT_TOL: f64 = 1e-12;
const HADAMARD_TOL: f64 = 1e-12;
const SUPPORT_TOL: f64 = 1e-12;

/// Coefficient matrix `A` (`N2 × N3`) of a pure resource.
#[derive(Debug, Clone, PartialEq)]
pub struct ResourceCoefficients {
    a: ComplexMatrix,
}

impl ResourceCoefficients {
    pub fn new(a: ComplexMatrix) -> Result<Self> {
        if a.is_empty() {
            return Err(QtpError::InvalidState("empty coefficient matrix".into()));
        }
        if a.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
            return Err(QtpError::InvalidState("non-finite coefficient".into()));
        }
        let norm = a.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(QtpError::InvalidState(format!("Σ|a_ij|² = {} differs from 1", norm * norm)));
        }
        Ok(Self { a })
    }

    /// Square diagonal resource `a_ii = √λ_i`.
    pub fn from_schmidt_weights(lambdas: &[f64]) -> Result<Self> {
        if lambdas.iter().any(|&l| !(l >= 0.0)) {
            return Err(QtpError::InvalidParameter("Schmidt weights must be nonnegative".into()));
        }
        let n = lambdas.len();
        let mut a = ComplexMatrix::zeros(n, n);
        for (i, &l) in lambdas.iter().enumerate() {
            a[(i, i)] = Complex64::new(l.sqrt(), 0.0);
        }
        Self::new(a)
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.a
    }

    pub fn n2(&self) -> usize {
        self.a.nrows()
    }

    pub fn n3(&self) -> usize {
        self.a.ncols()
    }

    /// `Σ a_jk |jk⟩` on `H2 ⊗ H3`.
    pub fn state(&self) -> StateVector {
        let (n2, n3) = self.a.shape();
        StateVector::from_vector_unchecked(ComplexVector::from_fn(n2 * n3, |r, _| self.a[(r / n3, r % n3)]))
    }

    /// Squared Schmidt coefficients, descending.
    pub fn schmidt_weights(&self) -> Vec<f64> {
        schmidt_weights_of_matrix(&self.a)
    }
}

/// `A = I/√n`, the canonical maximally entangled resource.
pub fn diagonal_resource(n: usize) -> Result<ResourceCoefficients> {
    if n < 2 {
        return Err(QtpError::InvalidParameter(format!("resource dimension must be >= 2, got {n}")));
    }
    ResourceCoefficients::new(identity(n).unscale((n as f64).sqrt()))
}

/// Resource maximally entangled on `support ⊂ {0..n1}`: row `q` carries
/// `1/√m` in column `support[q]` (support sorted ascending).
pub fn partial_support_resource(n1: usize, support: &[usize]) -> Result<ResourceCoefficients> {
    if support.is_empty() {
        return Err(QtpError::InvalidParameter("empty support".into()));
    }
    let mut sorted = support.to_vec();
    sorted.sort_unstable();
    if let Some(&bad) = sorted.iter().find(|&&k| k >= n1) {
        return Err(QtpError::IndexOutOfRange { index: bad, bound: n1 });
    }
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(QtpError::InvalidParameter(format!("repeated index in support {support:?}")));
    }
    let m = sorted.len();
    let amp = Complex64::new(1.0 / (m as f64).sqrt(), 0.0);
    let mut a = ComplexMatrix::zeros(m, n1);
    for (q, &k) in sorted.iter().enumerate() {
        a[(q, k)] = amp;
    }
    ResourceCoefficients::new(a)
}

/// Sender coefficients grouped as `N2 × N1` blocks `(B_st)_ji = b_ijst`,
/// indexed `s·N2 + t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SenderBlocks {
    n1: usize,
    n2: usize,
    blocks: Vec<ComplexMatrix>,
}

impl SenderBlocks {
    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn block(&self, s: usize, t: usize) -> &ComplexMatrix {
        &self.blocks[s * self.n2 + t]
    }

    pub fn blocks(&self) -> &[ComplexMatrix] {
        &self.blocks
    }

    /// `b_ijst`.
    pub fn b(&self, i: usize, j: usize, s: usize, t: usize) -> Complex64 {
        self.block(s, t)[(j, i)]
    }
}

/// `U|ij⟩ = Σ_st b_ijst |st⟩`, i.e. `U[(s,t),(i,j)] = b_ijst`.
pub fn assemble_unitary(blocks: &SenderBlocks) -> Result<UnitaryOperator> {
    let (n1, n2) = (blocks.n1, blocks.n2);
    let d = n1 * n2;
    let u = ComplexMatrix::from_fn(d, d, |row, col| {
        let (s, t) = (row / n2, row % n2);
        let (i, j) = (col / n2, col % n2);
        blocks.blocks[s * n2 + t][(j, i)]
    });
    UnitaryOperator::with_tolerance(u, UNITARY_TOL)
}

/// `O_ik = diag(c*_{i,·,k}) Π^{−k}` on `N1` for a full-support resource, with
/// `Π|m⟩ = |m+1 mod N1⟩`. It maps `Σ_j c_ijk α_j |j+k⟩` back to `Σ α_j |j⟩`.
pub fn correction_operator(i: usize, k: usize, c: &PhaseTable, n1: usize) -> Result<UnitaryOperator> {
    if c.n1() != n1 {
        return Err(dim_mismatch(format!("phase table has n1 = {}, requested {n1}", c.n1())));
    }
    if i >= n1 {
        return Err(QtpError::IndexOutOfRange { index: i, bound: n1 });
    }
    if k >= c.n2() {
        return Err(QtpError::IndexOutOfRange { index: k, bound: c.n2() });
    }
    let support: Vec<usize> = (0..n1).collect();
    Ok(support_correction(c, &support, i, k))
}

/// Correction for outcome `(s, t)`, `t < m`: `|e(q+t)⟩ ↦ c*_{s,e(q),t} |e(q)⟩`,
/// identity off the support.
fn support_correction(c: &PhaseTable, support: &[usize], s: usize, t: usize) -> UnitaryOperator {
    let n1 = c.n1();
    let m = support.len();
    let mut o = identity(n1);
    for &k in support {
        o[(k, k)] = ZERO;
    }
    for (q, &e) in support.iter().enumerate() {
        o[(e, support[(q + t) % m])] = c.get(s, e, t).conj();
    }
    UnitaryOperator::from_matrix_unchecked(o)
}

/// How the constraint equation was solved.
#[derive(Debug, Clone, PartialEq)]
enum Shape {
    /// Each active row of `A` has one nonzero entry.
    Support,
    /// Square invertible `A`; holds `(Aᵀ)⁻¹`.
    Generic(ComplexMatrix),
}

/// A solved protocol: sender blocks, the assembled unitary and the
/// receiver's corrections.
#[derive(Debug, Clone)]
pub struct PureProtocol {
    resource: ResourceCoefficients,
    phases: PhaseTable,
    rows: Vec<usize>,
    support: Vec<usize>,
    blocks: SenderBlocks,
    unitary: UnitaryOperator,
    corrections: Vec<UnitaryOperator>,
}

impl PureProtocol {
    /// Solves for the sender blocks and checks that the result is unitary.
    ///
    /// Fails with [`QtpError::UnsolvableResource`] when `A` is not maximally
    /// entangled on its support and with [`QtpError::InvalidPhaseTable`]
    /// when a needed phase slice is not a complex Hadamard matrix.
    pub fn build(resource: ResourceCoefficients, phases: PhaseTable) -> Result<Self> {
        let a = resource.matrix();
        let (n1, n2) = (phases.n1(), phases.n2());
        if a.ncols() != n1 {
            return Err(dim_mismatch(format!("resource has N3 = {}, phase table has N1 = {n1}", a.ncols())));
        }
        if a.nrows() != n2 {
            return Err(dim_mismatch(format!("resource has N2 = {}, phase table has N2 = {n2}", a.nrows())));
        }

        let (rows, support, shape) = match support_pattern(a) {
            Some((rows, support)) => {
                let weights: Vec<f64> = rows.iter().zip(&support).map(|(&j, &k)| a[(j, k)].norm_sqr()).collect();
                check_uniform(&weights, "Schmidt weights are not uniform on the support")?;
                (rows, support, Shape::Support)
            }
            None => {
                let weights = resource.schmidt_weights();
                check_uniform(&weights, "Schmidt weights are not uniform")?;
                if n2 != n1 {
                    return Err(QtpError::UnsolvableResource {
                        reason: "maximally entangled resource is neither diagonal nor partial-support".into(),
                        defect: 0.0,
                    });
                }
                let inv = a.transpose().try_inverse().ok_or_else(|| QtpError::UnsolvableResource {
                    reason: "coefficient matrix is singular".into(),
                    defect: 1.0,
                })?;
                ((0..n1).collect(), (0..n1).collect(), Shape::Generic(inv))
            }
        };
        let m = support.len();

        let defect = (0..m).map(|t| phases.hadamard_defect(t)).fold(0.0, f64::max);
        if !(defect <= HADAMARD_TOL) {
            return Err(QtpError::InvalidPhaseTable { defect });
        }

        let blocks = solve_blocks(a, &phases, &rows, &support, &shape);
        let unitary = assemble_unitary(&blocks)?;
        let corrections = (0..n1)
            .flat_map(|s| (0..n2).map(move |t| (s, t)))
            .map(|(s, t)| {
                if t < m {
                    support_correction(&phases, &support, s, t)
                } else {
                    UnitaryOperator::identity(n1)
                }
            })
            .collect();
        Ok(Self { resource, phases, rows, support, blocks, unitary, corrections })
    }

    pub fn resource(&self) -> &ResourceCoefficients {
        &self.resource
    }

    pub fn phases(&self) -> &PhaseTable {
        &self.phases
    }

    pub fn n1(&self) -> usize {
        self.phases.n1()
    }

    pub fn n2(&self) -> usize {
        self.phases.n2()
    }

    /// Columns of `A` that carry the entanglement, in cyclic order.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn blocks(&self) -> &SenderBlocks {
        &self.blocks
    }

    pub fn unitary(&self) -> &UnitaryOperator {
        &self.unitary
    }

    /// Receiver correction for outcome `(s, t)`.
    pub fn correction(&self, s: usize, t: usize) -> &UnitaryOperator {
        &self.corrections[s * self.n2() + t]
    }

    /// Runs the protocol on `psi0` and reports every measurement outcome.
    pub fn teleport(&self, psi0: &StateVector) -> Result<TeleportResult> {
        let (n1, n2) = (self.n1(), self.n2());
        if psi0.dim() != n1 {
            return Err(dim_mismatch(format!("input has dimension {}, protocol teleports N1 = {n1}", psi0.dim())));
        }
        let alpha = psi0.amplitudes();
        let leaked = (0..n1)
            .filter(|k| !self.support.contains(k))
            .map(|k| alpha[k].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if leaked > SUPPORT_TOL {
            return Err(QtpError::SupportViolation { leaked });
        }

        // ψ ⊗ Ψ as an (N1·N2) × N1 matrix: rows (i, j) on H1 ⊗ H2, columns k on H3
        let a = self.resource.matrix();
        let joint = ComplexMatrix::from_fn(n1 * n2, n1, |row, k| alpha[row / n2] * a[(row % n2, k)]);
        let after = self.unitary.matrix() * joint;

        let outcomes = (0..n1 * n2)
            .map(|row| {
                let (s, t) = (row / n2, row % n2);
                let bob = after.row(row).transpose();
                let probability = bob.norm_squared();
                let correction = self.corrections[row].clone();
                let (uncorrected, corrected, recovery_fidelity) = if probability > 0.0 {
                    let v = bob.unscale(probability.sqrt());
                    let fixed = correction.matrix() * &v;
                    let fidelity = alpha.dotc(&fixed).norm();
                    (
                        Some(StateVector::from_vector_unchecked(v)),
                        Some(StateVector::from_vector_unchecked(fixed)),
                        fidelity,
                    )
                } else {
                    (None, None, f64::NAN)
                };
                TeleportOutcome { s, t, probability, uncorrected, correction, corrected, recovery_fidelity }
            })
            .collect();
        Ok(TeleportResult { outcomes })
    }
}

/// Active rows and their single nonzero column, if `A` has that shape.
fn support_pattern(a: &ComplexMatrix) -> Option<(Vec<usize>, Vec<usize>)> {
    let mut rows = Vec::new();
    let mut cols = Vec::new();
    for j in 0..a.nrows() {
        let nz: Vec<usize> = (0..a.ncols()).filter(|&k| a[(j, k)].norm() > ZERO_AMPLITUDE).collect();
        match nz.as_slice() {
            [] => {}
            [k] => {
                rows.push(j);
                cols.push(*k);
            }
            _ => return None,
        }
    }
    let mut seen = cols.clone();
    seen.sort_unstable();
    seen.dedup();
    (seen.len() == cols.len()).then_some((rows, cols))
}

fn check_uniform(weights: &[f64], reason: &str) -> Result<()> {
    let verdict = maximality_necessity_check(weights);
    if verdict.solvable {
        Ok(())
    } else {
        Err(QtpError::UnsolvableResource { reason: reason.into(), defect: verdict.defect })
    }
}

fn solve_blocks(a: &ComplexMatrix, c: &PhaseTable, rows: &[usize], support: &[usize], shape: &Shape) -> SenderBlocks {
    let (n1, n2) = (c.n1(), c.n2());
    let m = support.len();
    let mut blocks = vec![ComplexMatrix::zeros(n2, n1); n1 * n2];
    let scale = 1.0 / ((n1 * m) as f64).sqrt();

    for (p, &i) in support.iter().enumerate() {
        for t in 0..m {
            let q = (p + t) % m;
            for s in 0..n1 {
                let r = c.get(s, i, t) * scale;
                let block = &mut blocks[s * n2 + t];
                match shape {
                    Shape::Support => block[(rows[q], i)] = r / a[(rows[q], support[q])],
                    Shape::Generic(inv) => {
                        for j in 0..n2 {
                            block[(j, i)] = inv[(j, support[q])] * r;
                        }
                    }
                }
            }
        }
    }

    // Completion. Columns (i ∉ support, rows[q]) take the unused Hadamard
    // columns of slice q; inactive rows of A map straight to the spare t.
    for i in (0..n1).filter(|i| !support.contains(i)) {
        for (q, &row) in rows.iter().enumerate() {
            for s in 0..n1 {
                blocks[s * n2 + q][(row, i)] = c.get(s, i, q) / (n1 as f64).sqrt();
            }
        }
    }
    for (rank, j) in (0..n2).filter(|j| !rows.contains(j)).enumerate() {
        for i in 0..n1 {
            blocks[i * n2 + m + rank][(j, i)] = ONE;
        }
    }
    SenderBlocks { n1, n2, blocks }
}

/// Deviations from the three solvability conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MaiResiduals {
    /// `max |tr(B_st B†_s't') − δ_ss'δ_tt'|`.
    pub orthogonality: f64,
    /// `max |P T_st† T_st P − |λ|² P|` with `T_st = Aᵀ B_st`, `P` the support
    /// projector and `|λ|² = 1/(N1·m)`.
    pub lambda: f64,
    /// `max |A_S A_S† − I/m|` on the active block of `A`.
    pub maximality: f64,
    pub lambda_sq: f64,
}

pub fn mai_residuals(protocol: &PureProtocol) -> MaiResiduals {
    let blocks = &protocol.blocks;
    let n1 = protocol.n1();
    let m = protocol.support.len();
    let a = protocol.resource.matrix();

    let mut orthogonality: f64 = 0.0;
    for (x, bx) in blocks.blocks.iter().enumerate() {
        for (y, by) in blocks.blocks.iter().enumerate() {
            let tr: Complex64 = bx.iter().zip(by.iter()).map(|(u, v)| u * v.conj()).sum();
            let expect = if x == y { ONE } else { ZERO };
            orthogonality = orthogonality.max((tr - expect).norm());
        }
    }

    let lambda_sq = 1.0 / (n1 * m) as f64;
    let mut proj = ComplexMatrix::zeros(n1, n1);
    for &k in &protocol.support {
        proj[(k, k)] = ONE;
    }
    let mut lambda: f64 = 0.0;
    for s in 0..n1 {
        for t in 0..m {
            let tm = a.transpose() * blocks.block(s, t);
            let gram = &proj * tm.adjoint() * &tm * &proj;
            lambda = lambda.max(max_abs_diff(&gram, &proj.scale(lambda_sq)));
        }
    }

    let a_s = ComplexMatrix::from_fn(m, m, |x, y| a[(protocol.rows[x], protocol.support[y])]);
    let maximality = max_abs_diff(&(&a_s * a_s.adjoint()), &identity(m).unscale(m as f64));
    MaiResiduals { orthogonality, lambda, maximality, lambda_sq }
}

/// Solves the constraint equation for `A` and `c`.
pub fn solve_sender_blocks(a: &ResourceCoefficients, c: &PhaseTable) -> Result<SenderBlocks> {
    PureProtocol::build(a.clone(), c.clone()).map(|p| p.blocks)
}

/// One measurement outcome `(s, t)` of the sender.
#[derive(Debug, Clone)]
pub struct TeleportOutcome {
    pub s: usize,
    pub t: usize,
    pub probability: f64,
    /// Receiver state before correction, normalized. `None` for outcomes of
    /// probability zero.
    pub uncorrected: Option<StateVector>,
    pub correction: UnitaryOperator,
    pub corrected: Option<StateVector>,
    /// `|⟨ψ0|corrected⟩|`, NaN for impossible outcomes.
    pub recovery_fidelity: f64,
}

#[derive(Debug, Clone)]
pub struct TeleportResult {
    pub outcomes: Vec<TeleportOutcome>,
}

impl TeleportResult {
    pub fn total_probability(&self) -> f64 {
        self.outcomes.iter().map(|o| o.probability).sum()
    }

    /// `max (1 − |⟨ψ0|ψ_out⟩|)` over outcomes that can occur.
    pub fn worst_recovery_defect(&self) -> f64 {
        self.outcomes
            .iter()
            .filter(|o| o.probability > 0.0)
            .map(|o| 1.0 - o.recovery_fidelity)
            .fold(0.0, f64::max)
    }
}

/// Builds the protocol for `(A, c)` and teleports `psi0`.
pub fn teleport_pure(psi0: &StateVector, a: &ResourceCoefficients, c: &PhaseTable) -> Result<TeleportResult> {
    PureProtocol::build(a.clone(), c.clone())?.teleport(psi0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NecessityVerdict {
    pub solvable: bool,
    /// `max_i |N·λ_i − 1|`. Forcing the constraint on a Schmidt-diagonal
    /// resource gives sender columns of squared norm `1/(N·λ_i)`, so this is
    /// zero exactly when every column can be unit length.
    pub defect: f64,
}

/// Perfect teleportation needs all Schmidt weights equal to `1/N`.
pub fn maximality_necessity_check(lambdas: &[f64]) -> NecessityVerdict {
    if lambdas.is_empty() {
        return NecessityVerdict { solvable: false, defect: f64::INFINITY };
    }
    let n = lambdas.len() as f64;
    let defect = lambdas.iter().map(|l| (n * l - 1.0).abs()).fold(0.0, f64::max);
    let solvable = lambdas.iter().all(|l| (l - 1.0 / n).abs() <= WEIGHT_TOL);
    NecessityVerdict { solvable, defect }
}

#[cfg(test)]
mod tests;
