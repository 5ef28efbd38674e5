//! Singlet fraction, fully entangled fraction and transmission fidelities.
//!
//! The fully entangled fraction `ℱ(χ) = max_U ⟨Φ|(1⊗U†)χ(1⊗U)|Φ⟩` is found by
//! gradient ascent on `U(n)`: steps `U ← U exp(iαG)` along the Hermitian
//! generator `G = Σ g_k E_k`, where `g` is a central finite-difference
//! gradient over the `n²` generators `E_k` and `α` comes from a backtracking
//! line search with an Armijo condition. Restarts run in parallel on
//! independent sub-streams of one seed, and the best value wins.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::CorrectionFamily;
use crate::error::{dim_mismatch, QtpError, Result};
use crate::linalg::random::{haar_state_with, haar_unitary_with};
use crate::linalg::{
    expectation, expm_i_hermitian, max_entangled_vector, polar_unitary, stream_rng, ComplexMatrix, ComplexVector,
    DensityOperator, UnitaryOperator,
};
use crate::weyl::WeylBasis;

/// `n·x/(n+1) + 1/(n+1)`.
pub fn affine_fidelity(n: usize, x: f64) -> f64 {
    let nf = n as f64;
    nf * x / (nf + 1.0) + 1.0 / (nf + 1.0)
}

/// `F(χ) = ⟨Φ|χ|Φ⟩`, clamped to `[0, 1]`.
pub fn singlet_fraction(chi: &DensityOperator) -> Result<f64> {
    let n = chi.bipartite_side()?;
    let f = expectation(chi.matrix(), &max_entangled_vector(n)).re;
    Ok(f.clamp(0.0, 1.0))
}

/// Standard-protocol fidelity `n F/(n+1) + 1/(n+1)`.
pub fn fidelity_standard(chi: &DensityOperator) -> Result<f64> {
    let n = chi.bipartite_side()?;
    Ok(affine_fidelity(n, singlet_fraction(chi)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub max_iterations: usize,
    pub gradient_step: f64,
    /// Stop once one accepted step gains less than this.
    pub convergence_threshold: f64,
    /// Haar samples in the global safeguard scan. Zero disables it.
    pub safeguard_samples: usize,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            restarts: 20,
            max_iterations: 2000,
            gradient_step: 1e-6,
            convergence_threshold: 1e-10,
            safeguard_samples: 10_000,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(QtpError::InvalidParameter("optimizer needs at least one restart".into()));
        }
        if self.max_iterations == 0 {
            return Err(QtpError::InvalidParameter("optimizer needs at least one iteration".into()));
        }
        if !(self.gradient_step > 0.0 && self.gradient_step.is_finite()) {
            return Err(QtpError::InvalidParameter(format!("gradient step {} must be positive", self.gradient_step)));
        }
        if !(self.convergence_threshold >= 0.0) {
            return Err(QtpError::InvalidParameter("convergence threshold must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerReport {
    pub restarts_used: usize,
    /// Restart that produced the returned value. Restart 0 starts at the
    /// identity, the others at Haar-random unitaries.
    pub best_restart: usize,
    /// Iterations of the winning run.
    pub iterations: usize,
    pub total_iterations: usize,
    pub final_gradient_norm: f64,
    /// The winning run stopped on the iteration cap instead of converging.
    pub hit_max_iterations: bool,
    /// Largest objective found by the Haar scan, if it ran.
    pub safeguard_best: Option<f64>,
    /// The scan beat the ascent and a new ascent was started from it.
    pub safeguard_triggered: bool,
}

#[derive(Debug, Clone)]
pub struct FefResult {
    /// Objective evaluated exactly at `maximizer`.
    pub value: f64,
    pub maximizer: UnitaryOperator,
    pub report: OptimizerReport,
}

/// `⟨Φ|(1⊗U†)χ(1⊗U)|Φ⟩` for a raw `n² × n²` matrix `chi`.
pub fn fef_objective(chi: &ComplexMatrix, u: &ComplexMatrix) -> f64 {
    let n = u.nrows();
    let scale = 1.0 / (n as f64).sqrt();
    // (1⊗U)|Φ⟩ has amplitude U[k,i]/√n at |i k⟩
    let v = ComplexVector::from_fn(n * n, |r, _| u[(r % n, r / n)] * scale);
    expectation(chi, &v).re
}

/// `exp(iθE_k)` for the `k`-th Hermitian generator: diagonal units first,
/// then `|j⟩⟨l| + |l⟩⟨j|` and `−i|j⟩⟨l| + i|l⟩⟨j|` for `j < l`.
fn generator(n: usize, k: usize) -> ComplexMatrix {
    let mut e = ComplexMatrix::zeros(n, n);
    if k < n {
        e[(k, k)] = num_complex::Complex64::new(1.0, 0.0);
        return e;
    }
    let off = k - n;
    let (pair, imag) = (off / 2, off % 2 == 1);
    let (mut j, mut rest) = (0, pair);
    while rest >= n - 1 - j {
        rest -= n - 1 - j;
        j += 1;
    }
    let l = j + 1 + rest;
    if imag {
        e[(j, l)] = num_complex::Complex64::new(0.0, -1.0);
        e[(l, j)] = num_complex::Complex64::new(0.0, 1.0);
    } else {
        e[(j, l)] = num_complex::Complex64::new(1.0, 0.0);
        e[(l, j)] = num_complex::Complex64::new(1.0, 0.0);
    }
    e
}

struct Ascent {
    u: ComplexMatrix,
    value: f64,
    iterations: usize,
    gradient_norm: f64,
    hit_max_iterations: bool,
}

const ARMIJO: f64 = 0.25;

fn ascend(chi: &ComplexMatrix, start: ComplexMatrix, generators: &[(ComplexMatrix, ComplexMatrix)], cfg: &OptimizerConfig) -> Ascent {
    let h = cfg.gradient_step;
    let mut u = start;
    let mut f = fef_objective(chi, &u);
    let mut theta: f64 = 0.5;
    let mut gradient_norm = f64::NAN;
    for iter in 1..=cfg.max_iterations {
        let g: Vec<f64> = generators
            .iter()
            .map(|(plus, minus)| (fef_objective(chi, &(&u * plus)) - fef_objective(chi, &(&u * minus))) / (2.0 * h))
            .collect();
        gradient_norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(gradient_norm > 1e-13) {
            return Ascent { u, value: f, iterations: iter, gradient_norm, hit_max_iterations: false };
        }
        let direction = generators
            .iter()
            .enumerate()
            .fold(ComplexMatrix::zeros(u.nrows(), u.nrows()), |acc, (k, _)| acc + generator(u.nrows(), k).scale(g[k]));
        // α‖g‖ is the rotation angle of the step
        let mut alpha = theta / gradient_norm;
        let accepted = loop {
            let cand = polar_unitary(&(&u * expm_i_hermitian(&direction.scale(alpha))));
            let fc = fef_objective(chi, &cand);
            if fc >= f + ARMIJO * alpha * gradient_norm * gradient_norm {
                break Some((cand, fc));
            }
            alpha *= 0.5;
            if alpha * gradient_norm < 1e-12 {
                break None;
            }
        };
        let Some((cand, fc)) = accepted else {
            return Ascent { u, value: f, iterations: iter, gradient_norm, hit_max_iterations: false };
        };
        let gain = fc - f;
        u = cand;
        f = fc;
        theta = (2.0 * alpha * gradient_norm).min(std::f64::consts::PI);
        if gain < cfg.convergence_threshold {
            return Ascent { u, value: f, iterations: iter, gradient_norm, hit_max_iterations: false };
        }
    }
    Ascent { u, value: f, iterations: cfg.max_iterations, gradient_norm, hit_max_iterations: true }
}

const SAFEGUARD_STREAM: u64 = 1 << 32;
const SAFEGUARD_BATCH: usize = 1024;
const SAFEGUARD_MARGIN: f64 = 1e-9;

/// Best Haar sample over `samples` draws, in fixed batches.
fn haar_scan(chi: &ComplexMatrix, n: usize, samples: usize, seed: u64) -> (f64, ComplexMatrix) {
    let batches = samples.div_ceil(SAFEGUARD_BATCH);
    let results: Vec<(f64, ComplexMatrix)> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(seed, SAFEGUARD_STREAM + b as u64);
            let count = SAFEGUARD_BATCH.min(samples - b * SAFEGUARD_BATCH);
            let mut best = (f64::NEG_INFINITY, ComplexMatrix::identity(n, n));
            for _ in 0..count {
                let u = haar_unitary_with(n, &mut rng).into_matrix();
                let v = fef_objective(chi, &u);
                if v > best.0 {
                    best = (v, u);
                }
            }
            best
        })
        .collect();
    results
        .into_iter()
        .fold((f64::NEG_INFINITY, ComplexMatrix::identity(n, n)), |acc, r| if r.0 > acc.0 { r } else { acc })
}

/// Maximizes the overlap with rotated maximally entangled states.
pub fn fully_entangled_fraction(chi: &DensityOperator, cfg: &OptimizerConfig) -> Result<FefResult> {
    let n = chi.bipartite_side()?;
    cfg.validate()?;
    let m = chi.matrix();
    let h = cfg.gradient_step;
    let generators: Vec<(ComplexMatrix, ComplexMatrix)> = (0..n * n)
        .map(|k| {
            let e = generator(n, k);
            (expm_i_hermitian(&e.scale(h)), expm_i_hermitian(&e.scale(-h)))
        })
        .collect();

    let runs: Vec<Ascent> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let start = if r == 0 {
                ComplexMatrix::identity(n, n)
            } else {
                haar_unitary_with(n, &mut stream_rng(cfg.seed, r as u64)).into_matrix()
            };
            ascend(m, start, &generators, cfg)
        })
        .collect();
    let total_iterations = runs.iter().map(|a| a.iterations).sum();
    let (best_restart, _) = runs
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, a)| if a.value > acc.1 { (i, a.value) } else { acc });
    let mut best = runs.into_iter().nth(best_restart).expect("at least one restart");

    let mut safeguard_best = None;
    let mut safeguard_triggered = false;
    if cfg.safeguard_samples > 0 {
        let (scan_value, scan_u) = haar_scan(m, n, cfg.safeguard_samples, cfg.seed);
        safeguard_best = Some(scan_value);
        if scan_value > best.value + SAFEGUARD_MARGIN {
            safeguard_triggered = true;
            let rerun = ascend(m, scan_u, &generators, cfg);
            if rerun.value > best.value {
                best = rerun;
            }
        }
    }

    let value = fef_objective(m, &best.u);
    let report = OptimizerReport {
        restarts_used: cfg.restarts,
        best_restart,
        iterations: best.iterations,
        total_iterations,
        final_gradient_norm: best.gradient_norm,
        hit_max_iterations: best.hit_max_iterations,
        safeguard_best,
        safeguard_triggered,
    };
    Ok(FefResult { value, maximizer: UnitaryOperator::from_matrix_unchecked(best.u), report })
}

/// Optimal-protocol fidelity `n ℱ/(n+1) + 1/(n+1)`.
pub fn fidelity_optimal(chi: &DensityOperator, cfg: &OptimizerConfig) -> Result<f64> {
    let n = chi.bipartite_side()?;
    Ok(affine_fidelity(n, fully_entangled_fraction(chi, cfg)?.value))
}

/// Fidelity of the protocol with corrections `T`:
/// `(1/(n(n+1))) Σ_γβ ⟨Φ|(1⊗V_γβ)† χ (1⊗V_γβ)|Φ⟩ + 1/(n+1)`, `V_γβ = T_γβ U_γβ†`.
pub fn fidelity_general(basis: &WeylBasis, chi: &DensityOperator, family: &CorrectionFamily) -> Result<f64> {
    let n = chi.bipartite_side()?;
    if n != basis.n() || family.n() != n {
        return Err(dim_mismatch(format!(
            "resource n = {n}, basis n = {}, corrections n = {}",
            basis.n(),
            family.n()
        )));
    }
    let sum: f64 = basis
        .ops()
        .iter()
        .zip(family.ops())
        .map(|(u, t)| fef_objective(chi.matrix(), &(t.matrix() * u.matrix().adjoint())))
        .sum();
    let nf = n as f64;
    Ok(sum / (nf * (nf + 1.0)) + 1.0 / (nf + 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    /// Jackknife standard error of the mean.
    pub standard_error: f64,
    pub samples: usize,
}

const MC_BATCH: usize = 1024;

/// Haar average of `⟨φ|Λ(|φ⟩⟨φ|)|φ⟩` over `samples` pure inputs.
///
/// Samples are drawn in fixed batches of 1024, batch `b` on sub-stream `b`
/// of `seed`, so the estimate does not depend on the thread count.
pub fn mc_average_fidelity<F>(channel: F, n: usize, samples: usize, seed: u64) -> Result<McEstimate>
where
    F: Fn(&DensityOperator) -> Result<DensityOperator> + Sync,
{
    if samples == 0 {
        return Err(QtpError::InvalidParameter("Monte Carlo needs at least one sample".into()));
    }
    if n == 0 {
        return Err(QtpError::InvalidParameter("dimension must be positive".into()));
    }
    let batches = samples.div_ceil(MC_BATCH);
    let values: Vec<Vec<f64>> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(seed, b as u64);
            let count = MC_BATCH.min(samples - b * MC_BATCH);
            (0..count)
                .map(|_| {
                    let phi = haar_state_with(n, &mut rng);
                    let out = channel(&phi.to_density(vec![n])?)?;
                    if out.side() != n {
                        return Err(dim_mismatch(format!("channel output side {} for input side {n}", out.side())));
                    }
                    Ok(expectation(out.matrix(), phi.amplitudes()).re)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = values.into_iter().flatten().collect();
    Ok(jackknife_mean(&xs))
}

fn jackknife_mean(xs: &[f64]) -> McEstimate {
    let len = xs.len();
    let total: f64 = xs.iter().sum();
    let estimate = total / len as f64;
    if len < 2 {
        return McEstimate { estimate, standard_error: 0.0, samples: len };
    }
    let nm1 = (len - 1) as f64;
    // θ_i − θ̄ = (x̄ − x_i)/(N−1) for leave-one-out means θ_i; centered form avoids cancellation
    let var = xs.iter().map(|x| ((estimate - x) / nm1).powi(2)).sum::<f64>() * nm1 / len as f64;
    McEstimate { estimate, standard_error: var.sqrt(), samples: len }
}

/// Everything known about one resource.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceAnalysis {
    pub n: usize,
    pub singlet_fraction: f64,
    pub fef: f64,
    pub optimizer_w: UnitaryOperator,
    pub f_standard: f64,
    pub f_optimal: f64,
    pub optimizer_report: OptimizerReport,
}

pub fn analyze_resource(chi: &DensityOperator, cfg: &OptimizerConfig) -> Result<ResourceAnalysis> {
    let n = chi.bipartite_side()?;
    let singlet_fraction = singlet_fraction(chi)?;
    let fef = fully_entangled_fraction(chi, cfg)?;
    Ok(ResourceAnalysis {
        n,
        singlet_fraction,
        fef: fef.value,
        f_standard: affine_fidelity(n, singlet_fraction),
        f_optimal: affine_fidelity(n, fef.value),
        optimizer_w: fef.maximizer,
        optimizer_report: fef.report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{apply_general, apply_standard};
    use crate::linalg::{haar_random_unitary, identity, max_abs_diff, random_density_matrix, tensor};

    fn quick() -> OptimizerConfig {
        OptimizerConfig { restarts: 4, safeguard_samples: 500, ..OptimizerConfig::default() }
    }

    fn isotropic(n: usize, f: f64) -> DensityOperator {
        let phi = max_entangled_vector(n);
        let p = &phi * phi.adjoint();
        let d = n * n;
        let m = p.scale(f) + (identity(d) - &p).scale((1.0 - f) / (d as f64 - 1.0));
        DensityOperator::new(m, vec![n, n]).unwrap()
    }

    fn right_rotated(chi: &DensityOperator, v: &UnitaryOperator) -> DensityOperator {
        let n = v.dim();
        let w = tensor(&identity(n), v.matrix());
        DensityOperator::new(&w * chi.matrix() * w.adjoint(), vec![n, n]).unwrap()
    }

    #[test]
    fn singlet_fraction_values() {
        let b = WeylBasis::new(2).unwrap();
        let epr = b.bell(0, 0).unwrap().to_density(vec![2, 2]).unwrap();
        assert!((singlet_fraction(&epr).unwrap() - 1.0).abs() < 1e-15);
        let flat = DensityOperator::maximally_mixed(vec![3, 3]).unwrap();
        assert!((singlet_fraction(&flat).unwrap() - 1.0 / 9.0).abs() < 1e-15);
        let flip = b.bell(0, 1).unwrap().to_density(vec![2, 2]).unwrap();
        assert!(singlet_fraction(&flip).unwrap().abs() < 1e-15);
        assert!((fidelity_standard(&flip).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let flat2 = DensityOperator::maximally_mixed(vec![2, 2]).unwrap();
        assert!((fidelity_standard(&flat2).unwrap() - 0.5).abs() < 1e-15);
        assert!(singlet_fraction(&random_density_matrix(&[2, 3], 1)).is_err());
    }

    #[test]
    fn generators_span_hermitian_matrices() {
        for n in 2..=4 {
            let gens: Vec<ComplexMatrix> = (0..n * n).map(|k| generator(n, k)).collect();
            for (a, g) in gens.iter().enumerate() {
                assert!(max_abs_diff(g, &g.adjoint()) == 0.0);
                for (b, h) in gens.iter().enumerate() {
                    let ip = crate::linalg::trace_of_product(g, h).re;
                    let expect = if a != b { 0.0 } else if a < n { 1.0 } else { 2.0 };
                    assert_eq!(ip, expect);
                }
            }
        }
    }

    #[test]
    fn objective_matches_direct_overlap() {
        let chi = random_density_matrix(&[3, 3], 5);
        let u = haar_random_unitary(3, 6);
        let v = tensor(&identity(3), u.matrix()) * max_entangled_vector(3);
        let direct = expectation(chi.matrix(), &v).re;
        assert!((fef_objective(chi.matrix(), u.matrix()) - direct).abs() < 1e-15);
    }

    #[test]
    fn bell_projectors_have_unit_fef() {
        for n in 2..=3 {
            let b = WeylBasis::new(n).unwrap();
            for (s, t) in b.labels() {
                let chi = b.bell(s, t).unwrap().to_density(vec![n, n]).unwrap();
                let r = fully_entangled_fraction(&chi, &quick()).unwrap();
                assert!((r.value - 1.0).abs() <= 1e-6, "({s},{t}): {}", r.value);
                assert!(r.maximizer.defect() < 1e-12);
            }
        }
    }

    #[test]
    fn flat_resource_is_constant() {
        let chi = DensityOperator::maximally_mixed(vec![3, 3]).unwrap();
        let r = fully_entangled_fraction(&chi, &quick()).unwrap();
        assert!((r.value - 1.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn rotated_isotropic_recovers_f() {
        for seed in 0..3 {
            let v = haar_random_unitary(2, seed);
            let chi = right_rotated(&isotropic(2, 0.8), &v);
            let r = fully_entangled_fraction(&chi, &quick()).unwrap();
            assert!((r.value - 0.8).abs() <= 1e-6, "{}", r.value);
        }
    }

    #[test]
    fn fef_dominates_singlet_fraction() {
        for seed in 0..10 {
            let chi = random_density_matrix(&[2, 2], seed);
            let r = fully_entangled_fraction(&chi, &quick()).unwrap();
            assert!(r.value >= singlet_fraction(&chi).unwrap() - 1e-9);
            // the identity restart alone already reaches F
            let single = OptimizerConfig { restarts: 1, safeguard_samples: 0, ..OptimizerConfig::default() };
            let r1 = fully_entangled_fraction(&chi, &single).unwrap();
            assert!(r1.value >= singlet_fraction(&chi).unwrap());
        }
    }

    #[test]
    fn optimizer_is_deterministic() {
        let chi = random_density_matrix(&[3, 3], 12);
        let a = fully_entangled_fraction(&chi, &quick()).unwrap();
        let b = fully_entangled_fraction(&chi, &quick()).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.maximizer, b.maximizer);
        assert_eq!(a.report, b.report);
    }

    #[test]
    fn config_validation() {
        let chi = random_density_matrix(&[2, 2], 1);
        let bad = OptimizerConfig { restarts: 0, ..OptimizerConfig::default() };
        assert!(fully_entangled_fraction(&chi, &bad).is_err());
        let bad = OptimizerConfig { gradient_step: 0.0, ..OptimizerConfig::default() };
        assert!(fully_entangled_fraction(&chi, &bad).is_err());
        let json = r#"{"restarts": 3}"#;
        let cfg: OptimizerConfig = serde_json::from_str(json).unwrap();
        assert_eq!(cfg.restarts, 3);
        assert_eq!(cfg.max_iterations, 2000);
    }

    #[test]
    fn general_fidelity_reductions() {
        let n = 3;
        let b = WeylBasis::new(n).unwrap();
        let chi = random_density_matrix(&[n, n], 2);
        let std = fidelity_general(&b, &chi, &CorrectionFamily::standard(&b)).unwrap();
        assert!((std - fidelity_standard(&chi).unwrap()).abs() < 1e-12);
        let w = haar_random_unitary(n, 3);
        let opt = fidelity_general(&b, &chi, &CorrectionFamily::optimal(&b, &w).unwrap()).unwrap();
        assert!((opt - affine_fidelity(n, fef_objective(chi.matrix(), w.matrix()))).abs() < 1e-12);
    }

    #[test]
    fn mc_trivial_channels() {
        let id = mc_average_fidelity(|rho| Ok(rho.clone()), 3, 2000, 1).unwrap();
        assert!((id.estimate - 1.0).abs() < 1e-14);
        assert!(id.standard_error < 1e-14);
        let dep = mc_average_fidelity(|_| DensityOperator::maximally_mixed(vec![3]), 3, 2000, 1).unwrap();
        assert!((dep.estimate - 1.0 / 3.0).abs() < 1e-14);
        assert!(dep.standard_error < 1e-14);
        assert!(mc_average_fidelity(|rho| Ok(rho.clone()), 2, 0, 1).is_err());
    }

    #[test]
    fn jackknife_equals_sample_standard_error() {
        let xs = [0.1, 0.4, 0.35, 0.8, 0.2, 0.65];
        let est = jackknife_mean(&xs);
        let mean = xs.iter().sum::<f64>() / 6.0;
        let s2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 5.0;
        assert!((est.standard_error - (s2 / 6.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn mc_agrees_with_closed_forms() {
        let n = 2;
        let b = WeylBasis::new(n).unwrap();
        let chi = random_density_matrix(&[n, n], 31);
        let est = mc_average_fidelity(|rho| apply_standard(&b, &chi, rho).map(|o| o.rho_out), n, 20_000, 4).unwrap();
        let exact = fidelity_standard(&chi).unwrap();
        assert!((est.estimate - exact).abs() <= 3.0 * est.standard_error, "{est:?} vs {exact}");

        let family = CorrectionFamily::random(n, 8);
        let est = mc_average_fidelity(|rho| apply_general(&b, &chi, &family, rho).map(|o| o.rho_out), n, 20_000, 5)
            .unwrap();
        let exact = fidelity_general(&b, &chi, &family).unwrap();
        assert!((est.estimate - exact).abs() <= 3.0 * est.standard_error, "{est:?} vs {exact}");
    }

    #[test]
    fn analysis_invariants() {
        let chi = random_density_matrix(&[2, 2], 77);
        let a = analyze_resource(&chi, &quick()).unwrap();
        assert!(a.fef >= a.singlet_fraction - 1e-9);
        assert!((a.f_standard - affine_fidelity(2, a.singlet_fraction)).abs() < 1e-12);
        assert!((a.f_optimal - affine_fidelity(2, a.fef)).abs() < 1e-12);
        assert!(a.f_optimal >= a.f_standard - 1e-9);
        let text = serde_json::to_string(&a).unwrap();
        let back: ResourceAnalysis = serde_json::from_str(&text).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), text);
    }
}
