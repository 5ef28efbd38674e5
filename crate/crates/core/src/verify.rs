//! Self-check suite: algebraic identities of the Weyl basis, oracle
//! agreement of the channel formulas, fidelity laws and protocol recovery.
//!
//! Every check draws from its own sub-stream of one seed, so a report is a
//! pure function of its [`VerifyConfig`].

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{apply_general, apply_standard, simulate_protocol, CorrectionFamily};
use crate::error::{QtpError, Result};
use crate::fidelity::{
    fidelity_standard, fully_entangled_fraction, mc_average_fidelity, singlet_fraction, OptimizerConfig,
};
use crate::linalg::random::{haar_state_with, haar_unitary_with, random_density_with};
use crate::linalg::{identity, max_abs_diff, stream_rng, tensor, ComplexMatrix, DensityOperator};
use crate::pure::{diagonal_resource, PhaseTable, PureProtocol};
use crate::resources::{from_ensemble, isotropic, EnsembleMember, EnsembleSpec};
use crate::weyl::{commutation_check, decompose_in_weyl, twirl_closed_form, weyl_average, WeylBasis};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub n_min: usize,
    pub n_max: usize,
    pub seed: u64,
    /// Haar samples for the Monte Carlo checks.
    pub samples: usize,
    pub restarts: usize,
    /// Builds the Weyl basis with `ω = exp(+2πi/n)`. Negative control only.
    #[serde(skip)]
    pub flip_omega: bool,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { n_min: 2, n_max: 4, seed: 0, samples: 10_000, restarts: 4, flip_omega: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub check: String,
    pub n: usize,
    pub deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckResult {
    fn new(check: &str, n: usize, deviation: f64, tolerance: f64) -> Self {
        Self { check: check.to_string(), n, deviation, tolerance, pass: deviation <= tolerance }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub config: VerifyConfig,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn first_failure(&self) -> Option<&CheckResult> {
        self.checks.iter().find(|c| !c.pass)
    }
}

/// Reference sample count the twirl tolerance is quoted at.
const TWIRL_REFERENCE_SAMPLES: f64 = 1e5;
const TWIRL_REFERENCE_TOL: f64 = 5e-3;
/// Largest `n` for the Monte Carlo twirl; its cost grows like `n⁶` per sample.
const TWIRL_MAX_N: usize = 3;
const MC_SIGMAS: f64 = 4.0;

/// `(1/N) Σ (U†⊗U†) σ (U⊗U)` over Haar samples, in batches of 1024 on
/// sub-streams of `seed`.
pub fn twirl_monte_carlo(sigma: &ComplexMatrix, n: usize, samples: usize, seed: u64) -> Result<ComplexMatrix> {
    if sigma.shape() != (n * n, n * n) {
        return Err(crate::error::dim_mismatch(format!("twirl input is not {0}x{0}", n * n)));
    }
    if samples == 0 {
        return Err(QtpError::InvalidParameter("twirl needs at least one sample".into()));
    }
    const BATCH: usize = 1024;
    let batches = samples.div_ceil(BATCH);
    let partial: Vec<ComplexMatrix> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(seed, b as u64);
            let count = BATCH.min(samples - b * BATCH);
            let mut acc = ComplexMatrix::zeros(n * n, n * n);
            for _ in 0..count {
                let u = haar_unitary_with(n, &mut rng);
                let uu = tensor(u.matrix(), u.matrix());
                acc += uu.adjoint() * sigma * &uu;
            }
            acc
        })
        .collect();
    let total = partial.into_iter().fold(ComplexMatrix::zeros(n * n, n * n), |a, b| a + b);
    Ok(total.unscale(samples as f64))
}

/// Sub-stream for one `(check, n)` pair.
fn rng_for(seed: u64, check: u64, n: usize) -> rand_chacha::ChaCha8Rng {
    stream_rng(seed, (check << 16) | n as u64)
}

fn max_of(values: impl IntoIterator<Item = f64>) -> f64 {
    // NaN propagates so that a broken computation can never pass
    values.into_iter().fold(0.0, |a, b| if b.is_nan() || a.is_nan() { f64::NAN } else { a.max(b) })
}

fn weyl_checks(basis: &WeylBasis, seed: u64) -> Vec<CheckResult> {
    let n = basis.n();
    let mut out = Vec::new();
    out.push(CheckResult::new("weyl_commutation", n, commutation_check(basis).max_deviation, 1e-12));

    let ops = basis.ops();
    let mut ortho = 0.0f64;
    let mut traces = 0.0f64;
    for (a, u) in ops.iter().enumerate() {
        let expect = if a == 0 { n as f64 } else { 0.0 };
        traces = traces.max((u.matrix().trace() - Complex64::new(expect, 0.0)).norm());
        for (b, v) in ops.iter().enumerate() {
            let ip = (u.matrix() * v.matrix().adjoint()).trace();
            let expect = if a == b { n as f64 } else { 0.0 };
            ortho = ortho.max((ip - Complex64::new(expect, 0.0)).norm());
        }
    }
    out.push(CheckResult::new("weyl_trace_orthogonality", n, ortho, 1e-12));
    out.push(CheckResult::new("weyl_traces", n, traces, 1e-12));

    let mut rng = rng_for(seed, 1, n);
    let rho = random_density_with(&[n], &mut rng);
    let avg = weyl_average(basis, rho.matrix());
    let completeness = max_abs_diff(&avg, &identity(n).scale(n as f64));
    out.push(CheckResult::new("weyl_completeness", n, completeness, 1e-12));

    let w = haar_unitary_with(n, &mut rng);
    let coeffs = decompose_in_weyl(basis, w.matrix()).expect("dimensions match");
    out.push(CheckResult::new("weyl_decomposition", n, max_abs_diff(&coeffs.reconstruct(basis), w.matrix()), 1e-12));

    let b = basis.bell_matrix();
    out.push(CheckResult::new("bell_orthonormality", n, max_abs_diff(&(b.adjoint() * &b), &identity(n * n)), 1e-12));
    out
}

fn channel_checks(basis: &WeylBasis, seed: u64) -> Result<Vec<CheckResult>> {
    let n = basis.n();
    let mut out = Vec::new();
    let mut rng = rng_for(seed, 2, n);
    let epr = basis.bell(0, 0)?.to_density(vec![n, n])?;
    let mut noiseless = 0.0f64;
    for _ in 0..5 {
        let rho = random_density_with(&[n], &mut rng);
        let o = apply_standard(basis, &epr, &rho)?;
        noiseless = max_of([noiseless, max_abs_diff(o.rho_out.matrix(), rho.matrix())]);
    }
    out.push(CheckResult::new("noiseless_channel", n, noiseless, 1e-12));

    let standard = CorrectionFamily::standard(basis);
    let (mut dev_std, mut dev_gen) = (0.0f64, 0.0f64);
    for _ in 0..5 {
        let chi = random_density_with(&[n, n], &mut rng);
        let rho = random_density_with(&[n], &mut rng);
        let a = apply_standard(basis, &chi, &rho)?;
        let b = simulate_protocol(basis, &chi, &standard, &rho)?;
        dev_std = max_of([dev_std, max_abs_diff(a.rho_out.matrix(), b.rho_out.matrix())]);

        let family = CorrectionFamily::random(n, rng.random());
        let a = apply_general(basis, &chi, &family, &rho)?;
        let b = simulate_protocol(basis, &chi, &family, &rho)?;
        dev_gen = max_of([dev_gen, max_abs_diff(a.rho_out.matrix(), b.rho_out.matrix())]);
    }
    out.push(CheckResult::new("oracle_standard", n, dev_std, 1e-10));
    out.push(CheckResult::new("oracle_general", n, dev_gen, 1e-10));

    let members: Vec<EnsembleMember> = [0.5, 0.3, 0.2]
        .iter()
        .map(|&weight| EnsembleMember { weight, state: haar_state_with(n * n, &mut rng) })
        .collect();
    let chi = from_ensemble(&EnsembleSpec { dims: None, members: members.clone() })?;
    let rho = random_density_with(&[n], &mut rng);
    let whole = apply_standard(basis, &chi, &rho)?.rho_out;
    let mut parts = ComplexMatrix::zeros(n, n);
    for m in &members {
        let pure = m.state.to_density(vec![n, n])?;
        parts += apply_standard(basis, &pure, &rho)?.rho_out.matrix().scale(m.weight);
    }
    out.push(CheckResult::new("ensemble_linearity", n, max_abs_diff(whole.matrix(), &parts), 1e-12));
    Ok(out)
}

fn fidelity_checks(basis: &WeylBasis, cfg: &VerifyConfig) -> Result<Vec<CheckResult>> {
    let n = basis.n();
    let nf = n as f64;
    let mut out = Vec::new();
    let mut law = 0.0f64;
    for f in [1.0 / (nf * nf), 0.5, 0.8, 1.0] {
        let chi = isotropic(n, f)?;
        law = max_of([law, (fidelity_standard(&chi)? - (nf * f / (nf + 1.0) + 1.0 / (nf + 1.0))).abs()]);
    }
    out.push(CheckResult::new("fidelity_law", n, law, 1e-12));

    let mut rng = rng_for(cfg.seed, 3, n);
    let chi = random_density_with(&[n, n], &mut rng);
    let est = mc_average_fidelity(
        |rho: &DensityOperator| apply_standard(basis, &chi, rho).map(|o| o.rho_out),
        n,
        cfg.samples,
        rng.random(),
    )?;
    let diff = (est.estimate - fidelity_standard(&chi)?).abs();
    out.push(CheckResult::new("fidelity_monte_carlo", n, diff, (MC_SIGMAS * est.standard_error).max(1e-12)));

    if n <= TWIRL_MAX_N {
        let sigma = random_density_with(&[n, n], &mut rng);
        let mc = twirl_monte_carlo(sigma.matrix(), n, cfg.samples, rng.random())?;
        let exact = twirl_closed_form(sigma.matrix())?;
        let tol = TWIRL_REFERENCE_TOL * (TWIRL_REFERENCE_SAMPLES / cfg.samples as f64).sqrt();
        out.push(CheckResult::new("twirl_monte_carlo", n, max_abs_diff(&mc, &exact), tol));
    }

    let opt = OptimizerConfig {
        restarts: cfg.restarts,
        seed: rng.random(),
        safeguard_samples: 1000,
        ..OptimizerConfig::default()
    };
    let mut bell_dev = 0.0f64;
    for (s, t) in [(0, 0), (n - 1, 1)] {
        let chi = basis.bell(s, t)?.to_density(vec![n, n])?;
        bell_dev = max_of([bell_dev, (fully_entangled_fraction(&chi, &opt)?.value - 1.0).abs()]);
    }
    out.push(CheckResult::new("fef_bell_states", n, bell_dev, 1e-6));

    let mut gap = 0.0f64;
    for _ in 0..3 {
        let chi = random_density_with(&[n, n], &mut rng);
        let fef = fully_entangled_fraction(&chi, &opt)?.value;
        gap = max_of([gap, (singlet_fraction(&chi)? - fef).max(0.0)]);
    }
    out.push(CheckResult::new("fef_dominance", n, gap, 1e-9));
    Ok(out)
}

fn pure_checks(n: usize, seed: u64) -> Result<Vec<CheckResult>> {
    let protocol = PureProtocol::build(diagonal_resource(n)?, PhaseTable::fourier(n, n))?;
    let mut rng = rng_for(seed, 4, n);
    let mut worst = 0.0f64;
    let mut prob = 0.0f64;
    for _ in 0..10 {
        let psi = haar_state_with(n, &mut rng);
        let r = protocol.teleport(&psi)?;
        worst = max_of([worst, r.worst_recovery_defect()]);
        prob = max_of([prob, (r.total_probability() - 1.0).abs()]);
    }
    Ok(vec![
        CheckResult::new("pure_recovery", n, worst, 1e-10),
        CheckResult::new("pure_probability", n, prob, 1e-12),
    ])
}

/// Runs every check for `n_min..=n_max` in a fixed order.
pub fn run_verify(cfg: &VerifyConfig) -> Result<VerifyReport> {
    if cfg.n_min < 2 || cfg.n_max < cfg.n_min {
        return Err(QtpError::InvalidParameter(format!("invalid dimension range {}..={}", cfg.n_min, cfg.n_max)));
    }
    if cfg.samples == 0 || cfg.restarts == 0 {
        return Err(QtpError::InvalidParameter("samples and restarts must be positive".into()));
    }
    let mut checks = Vec::new();
    for n in cfg.n_min..=cfg.n_max {
        let basis = if cfg.flip_omega { WeylBasis::with_flipped_omega(n)? } else { WeylBasis::new(n)? };
        checks.extend(weyl_checks(&basis, cfg.seed));
        checks.extend(channel_checks(&basis, cfg.seed)?);
        checks.extend(fidelity_checks(&basis, cfg)?);
        checks.extend(pure_checks(n, cfg.seed)?);
    }
    Ok(VerifyReport { config: cfg.clone(), checks })
}
