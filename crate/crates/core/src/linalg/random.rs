//! Seeded Haar sampling.
//!
//! One 64-bit seed determines every stream. Consumers that fan out (restarts,
//! Monte Carlo batches) take independent ChaCha streams of the same seed, so
//! results do not depend on thread scheduling.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{ComplexMatrix, ComplexVector, DensityOperator, StateVector, UnitaryOperator};

/// Generator for sub-stream `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im)
}

/// Haar-random pure state drawn from `rng`.
pub fn haar_state_with<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> StateVector {
    assert!(dim >= 1, "dimension must be positive");
    loop {
        let v = ComplexVector::from_fn(dim, |_, _| complex_normal(rng));
        let norm = v.norm();
        if norm > 1e-300 {
            return StateVector::from_vector_unchecked(v.unscale(norm));
        }
    }
}

/// Haar-random unitary drawn from `rng`: QR of a complex Ginibre matrix with
/// the phases of `diag(R)` moved into `Q`.
pub fn haar_unitary_with<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> UnitaryOperator {
    assert!(dim >= 1, "dimension must be positive");
    let z = ComplexMatrix::from_fn(dim, dim, |_, _| complex_normal(rng));
    let qr = z.qr();
    let r = qr.r();
    let mut q = qr.q();
    for (j, mut col) in q.column_iter_mut().enumerate() {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        col *= phase;
    }
    UnitaryOperator::from_matrix_unchecked(q)
}

/// Haar-random pure state, deterministic in `seed`.
pub fn haar_random_state(dim: usize, seed: u64) -> StateVector {
    haar_state_with(dim, &mut stream_rng(seed, 0))
}

/// Haar-random unitary, deterministic in `seed`.
pub fn haar_random_unitary(dim: usize, seed: u64) -> UnitaryOperator {
    haar_unitary_with(dim, &mut stream_rng(seed, 0))
}

/// Full-rank random density operator `GG†/tr(GG†)` from a Ginibre `G`.
pub fn random_density_with<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> DensityOperator {
    let side: usize = dims.iter().product();
    let g = ComplexMatrix::from_fn(side, side, |_, _| complex_normal(rng));
    let mut m = &g * g.adjoint();
    let tr = m.trace().re;
    m.unscale_mut(tr);
    // symmetrize away the last ulp of asymmetry from the product
    let m = (&m + m.adjoint()).scale(0.5);
    DensityOperator::new(m, dims.to_vec()).expect("Ginibre construction is a valid state")
}

/// Random full-rank density operator, deterministic in `seed`.
pub fn random_density_matrix(dims: &[usize], seed: u64) -> DensityOperator {
    random_density_with(dims, &mut stream_rng(seed, 0))
}
