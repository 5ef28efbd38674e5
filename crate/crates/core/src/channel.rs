//! Teleportation channels induced by a mixed resource `χ` on `n ⊗ n`.
//!
//! Party order is (input, sender half, receiver half). The closed forms are
//!
//! * standard: `Λ(ρ) = Σ_st ⟨Φ_st|χ|Φ_st⟩ U_st ρ U_st†`
//! * general:  `Λ(ρ) = (1/n²) Σ_{st,s't'} ⟨Φ_st|χ|Φ_s't'⟩ Σ_γβ T_γβ† U_st U_γβ ρ U_γβ† U_s't'† T_γβ`
//! * optimal:  the general form with `T_γβ = W U_γβ`
//!
//! [`simulate_protocol`] rebuilds the same map from the three-party state
//! without using any of them. Its Bell measurement labels outcome `(γ, β)` by
//! the vector `conj(|Φ_γβ⟩) = |Φ_{−γ,β}⟩`; that labelling is what makes the
//! receiver's branch `U_γβ ρ U_γβ†` before the correction `T† · T`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{dim_mismatch, QtpError, Result};
use crate::linalg::random::haar_unitary_with;
use crate::linalg::{stream_rng, ComplexMatrix, DensityOperator, MatrixJson, UnitaryOperator, UNITARY_TOL};
use crate::weyl::{bell_overlap_matrix, bell_vector, WeylBasis};

/// Bell weights in `[−1e-12, 0)` are roundoff and get clamped to zero.
pub const NEGATIVE_WEIGHT_TOL: f64 = 1e-12;

/// Receiver corrections `T_st`, flattened `s·n + t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CorrectionFamilyJson", into = "CorrectionFamilyJson")]
pub struct CorrectionFamily {
    n: usize,
    ops: Vec<UnitaryOperator>,
}

#[derive(Serialize, Deserialize)]
struct CorrectionFamilyJson {
    n: usize,
    ops: Vec<MatrixJson>,
}

impl TryFrom<CorrectionFamilyJson> for CorrectionFamily {
    type Error = QtpError;
    fn try_from(json: CorrectionFamilyJson) -> Result<Self> {
        let ops = json.ops.into_iter().map(UnitaryOperator::try_from).collect::<Result<Vec<_>>>()?;
        CorrectionFamily::new(json.n, ops)
    }
}

impl From<CorrectionFamily> for CorrectionFamilyJson {
    fn from(f: CorrectionFamily) -> Self {
        CorrectionFamilyJson { n: f.n, ops: f.ops.into_iter().map(MatrixJson::from).collect() }
    }
}

impl CorrectionFamily {
    pub fn new(n: usize, ops: Vec<UnitaryOperator>) -> Result<Self> {
        if ops.len() != n * n {
            return Err(dim_mismatch(format!("correction family for n = {n} needs {} operators, got {}", n * n, ops.len())));
        }
        if let Some(op) = ops.iter().find(|u| u.dim() != n) {
            return Err(dim_mismatch(format!("correction of side {} in a family for n = {n}", op.dim())));
        }
        if let Some(bad) = ops.iter().map(UnitaryOperator::defect).find(|d| !(*d <= UNITARY_TOL)) {
            return Err(QtpError::NotUnitary { defect: bad });
        }
        Ok(Self { n, ops })
    }

    /// `T_st = U_st`.
    pub fn standard(basis: &WeylBasis) -> Self {
        Self { n: basis.n(), ops: basis.ops().to_vec() }
    }

    /// `T_st = W U_st`.
    pub fn optimal(basis: &WeylBasis, w: &UnitaryOperator) -> Result<Self> {
        if w.dim() != basis.n() {
            return Err(dim_mismatch(format!("W has side {}, basis has n = {}", w.dim(), basis.n())));
        }
        Ok(Self { n: basis.n(), ops: basis.ops().iter().map(|u| w.compose(u)).collect() })
    }

    /// Independent Haar-random corrections.
    pub fn random(n: usize, seed: u64) -> Self {
        let ops = (0..n * n).map(|k| haar_unitary_with(n, &mut stream_rng(seed, k as u64))).collect();
        Self { n, ops }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn op(&self, s: usize, t: usize) -> &UnitaryOperator {
        &self.ops[s * self.n + t]
    }

    pub fn ops(&self) -> &[UnitaryOperator] {
        &self.ops
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelMethod {
    Standard,
    General,
    Optimal,
    Oracle,
}

#[derive(Debug, Clone)]
pub struct ChannelOutput {
    pub rho_out: DensityOperator,
    /// `|tr ρ_out − 1|`.
    pub trace_defect: f64,
    pub method: ChannelMethod,
}

impl ChannelOutput {
    fn new(m: ComplexMatrix, method: ChannelMethod) -> Self {
        let n = m.nrows();
        let trace_defect = (m.trace() - Complex64::new(1.0, 0.0)).norm();
        Self { rho_out: DensityOperator::from_parts_unchecked(m, vec![n]), trace_defect, method }
    }
}

fn check_inputs(basis: &WeylBasis, chi: &DensityOperator, rho: &DensityOperator) -> Result<usize> {
    let n = chi.bipartite_side()?;
    if n != basis.n() {
        return Err(dim_mismatch(format!("resource is {n}⊗{n}, basis has n = {}", basis.n())));
    }
    if rho.side() != n {
        return Err(dim_mismatch(format!("input has side {}, resource needs {n}", rho.side())));
    }
    Ok(n)
}

fn check_family(basis: &WeylBasis, family: &CorrectionFamily) -> Result<()> {
    if family.n != basis.n() {
        return Err(dim_mismatch(format!("correction family has n = {}, basis has n = {}", family.n, basis.n())));
    }
    Ok(())
}

/// `⟨Φ_st|χ|Φ_st⟩`, real part, flattened `s·n + t`.
fn bell_weights(basis: &WeylBasis, chi: &DensityOperator) -> Vec<f64> {
    basis
        .bells()
        .iter()
        .map(|b| crate::linalg::expectation(chi.matrix(), b.amplitudes()).re)
        .collect()
}

/// Sums in index order, so results are identical regardless of threading.
fn ordered_sum(n: usize, terms: Vec<ComplexMatrix>) -> ComplexMatrix {
    terms.into_iter().fold(ComplexMatrix::zeros(n, n), |acc, m| acc + m)
}

pub fn apply_standard(basis: &WeylBasis, chi: &DensityOperator, rho: &DensityOperator) -> Result<ChannelOutput> {
    let n = check_inputs(basis, chi, rho)?;
    let weights = bell_weights(basis, chi);
    let terms = basis
        .ops()
        .iter()
        .zip(&weights)
        .map(|(u, w)| (u.matrix() * rho.matrix() * u.matrix().adjoint()).scale(*w))
        .collect();
    Ok(ChannelOutput::new(ordered_sum(n, terms), ChannelMethod::Standard))
}

fn general_sum(basis: &WeylBasis, chi: &DensityOperator, family: &CorrectionFamily, rho: &DensityOperator) -> ComplexMatrix {
    let n = basis.n();
    let m = bell_overlap_matrix(basis, chi).expect("dims checked by caller");
    let ops = basis.ops();
    let terms: Vec<ComplexMatrix> = (0..n * n)
        .into_par_iter()
        .map(|gb| {
            let x = ops[gb].matrix() * rho.matrix() * ops[gb].matrix().adjoint();
            let mut inner = ComplexMatrix::zeros(n, n);
            for (st, u) in ops.iter().enumerate() {
                let left = u.matrix() * &x;
                for (st2, u2) in ops.iter().enumerate() {
                    let coeff = m[(st, st2)];
                    if coeff != Complex64::new(0.0, 0.0) {
                        inner += (&left * u2.matrix().adjoint()) * coeff;
                    }
                }
            }
            let t = family.ops[gb].matrix();
            t.adjoint() * inner * t
        })
        .collect();
    ordered_sum(n, terms).unscale((n * n) as f64)
}

/// General corrections, evaluated term by term.
pub fn apply_general(
    basis: &WeylBasis,
    chi: &DensityOperator,
    family: &CorrectionFamily,
    rho: &DensityOperator,
) -> Result<ChannelOutput> {
    check_inputs(basis, chi, rho)?;
    check_family(basis, family)?;
    Ok(ChannelOutput::new(general_sum(basis, chi, family, rho), ChannelMethod::General))
}

/// The general channel with `T_γβ = W U_γβ`.
pub fn apply_optimal(
    basis: &WeylBasis,
    chi: &DensityOperator,
    rho: &DensityOperator,
    w: &UnitaryOperator,
) -> Result<ChannelOutput> {
    check_inputs(basis, chi, rho)?;
    let family = CorrectionFamily::optimal(basis, w)?;
    Ok(ChannelOutput::new(general_sum(basis, chi, &family, rho), ChannelMethod::Optimal))
}

/// Receiver's corrected, unnormalized state for every outcome, in `s·n + t`
/// order. Each branch is `T† (⟨v|⊗1)(ρ⊗χ)(|v⟩⊗1) T` with `v = conj(|Φ_st⟩)`
/// acting on the first two parties.
pub fn protocol_branches(
    basis: &WeylBasis,
    chi: &DensityOperator,
    family: &CorrectionFamily,
    rho: &DensityOperator,
) -> Result<Vec<ComplexMatrix>> {
    let n = check_inputs(basis, chi, rho)?;
    check_family(basis, family)?;
    let joint = crate::linalg::tensor(rho.matrix(), chi.matrix());
    let n2 = n * n;
    let branches = basis
        .labels()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(s, t)| {
            let v = bell_vector(basis, s, t).map(|z| z.conj());
            // (⟨v| ⊗ 1) J (|v⟩ ⊗ 1), with the measured pair as the row block
            let mut left = ComplexMatrix::zeros(n, n2 * n);
            for a in 0..n2 {
                let va = v[a].conj();
                if va == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for k in 0..n {
                    for col in 0..n2 * n {
                        left[(k, col)] += va * joint[(a * n + k, col)];
                    }
                }
            }
            let mut bob = ComplexMatrix::zeros(n, n);
            for b in 0..n2 {
                let vb = v[b];
                if vb == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for k in 0..n {
                    for l in 0..n {
                        bob[(k, l)] += left[(k, b * n + l)] * vb;
                    }
                }
            }
            let tm = family.op(s, t).matrix();
            tm.adjoint() * bob * tm
        })
        .collect();
    Ok(branches)
}

/// Brute-force channel: project, correct and sum all branches.
pub fn simulate_protocol(
    basis: &WeylBasis,
    chi: &DensityOperator,
    family: &CorrectionFamily,
    rho: &DensityOperator,
) -> Result<ChannelOutput> {
    let branches = protocol_branches(basis, chi, family, rho)?;
    Ok(ChannelOutput::new(ordered_sum(basis.n(), branches), ChannelMethod::Oracle))
}

#[derive(Debug, Clone, PartialEq)]
pub struct KrausTerm {
    pub s: usize,
    pub t: usize,
    pub weight: f64,
    pub op: UnitaryOperator,
}

/// Standard channel as `Σ p_st U_st ρ U_st†` with `p_st = ⟨Φ_st|χ|Φ_st⟩`.
pub fn kraus_form(basis: &WeylBasis, chi: &DensityOperator) -> Result<Vec<KrausTerm>> {
    let n = chi.bipartite_side()?;
    if n != basis.n() {
        return Err(dim_mismatch(format!("resource is {n}⊗{n}, basis has n = {}", basis.n())));
    }
    basis
        .labels()
        .zip(bell_weights(basis, chi))
        .map(|((s, t), w)| {
            if w < -NEGATIVE_WEIGHT_TOL {
                return Err(QtpError::InvalidState(format!("Bell weight {w:.3e} at ({s},{t}) is negative")));
            }
            Ok(KrausTerm { s, t, weight: w.max(0.0), op: basis.op(s, t)?.clone() })
        })
        .collect()
}
