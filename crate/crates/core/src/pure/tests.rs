use super::*;
use crate::linalg::{haar_random_state, haar_random_unitary, schmidt_decompose, stream_rng, tensor};
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn real(rows: usize, cols: usize, v: &[f64]) -> ComplexMatrix {
    ComplexMatrix::from_row_slice(rows, cols, &v.iter().map(|&x| c(x, 0.0)).collect::<Vec<_>>())
}

fn sigma_x() -> ComplexMatrix {
    real(2, 2, &[0., 1., 1., 0.])
}

fn sigma_z() -> ComplexMatrix {
    real(2, 2, &[1., 0., 0., -1.])
}

fn i_sigma_y() -> ComplexMatrix {
    // i·[[0, −i], [i, 0]]
    real(2, 2, &[0., 1., -1., 0.])
}

fn hadamard() -> ComplexMatrix {
    let r = 1.0 / 2f64.sqrt();
    real(2, 2, &[r, r, r, -r])
}

fn cnot() -> ComplexMatrix {
    real(4, 4, &[1., 0., 0., 0., 0., 1., 0., 0., 0., 0., 0., 1., 0., 0., 1., 0.])
}

fn qubit(a: f64, b: f64) -> StateVector {
    StateVector::from_slice(&[c(a, 0.), c(b, 0.)]).unwrap()
}

#[test]
fn diagonal_resource_is_maximally_entangled() {
    let a = diagonal_resource(2).unwrap();
    let r = 1.0 / 2f64.sqrt();
    assert_eq!(a.matrix()[(0, 0)], c(r, 0.));
    assert_eq!(a.matrix()[(1, 1)], c(r, 0.));
    for n in 2..=6 {
        let a = diagonal_resource(n).unwrap();
        let aa = a.matrix() * a.matrix().adjoint();
        assert!(max_abs_diff(&aa, &identity(n).unscale(n as f64)) < 1e-14);
        let d = schmidt_decompose(&a.state(), (n, n)).unwrap();
        assert!(d.coefficients.iter().all(|x| (x - 1.0 / (n as f64).sqrt()).abs() < 1e-14));
    }
    assert!(diagonal_resource(1).is_err());
}

#[test]
fn partial_support_shapes() {
    let epr = partial_support_resource(4, &[1, 2]).unwrap();
    assert_eq!(epr.matrix().shape(), (2, 4));
    let r = 1.0 / 2f64.sqrt();
    assert_eq!(epr.matrix()[(0, 1)], c(r, 0.));
    assert_eq!(epr.matrix()[(1, 2)], c(r, 0.));

    // (|0,0⟩ + |1,3⟩)/√2 is (|000⟩ + |111⟩)/√2 once H3 is split into two qubits
    let ghz = partial_support_resource(4, &[0, 3]).unwrap().state();
    let mut expect = ComplexVector::zeros(8);
    expect[0] = c(r, 0.);
    expect[7] = c(r, 0.);
    assert_eq!(ghz.amplitudes(), &expect);

    let full = partial_support_resource(3, &[2, 0, 1]).unwrap();
    assert!(max_abs_diff(full.matrix(), diagonal_resource(3).unwrap().matrix()) < 1e-15);

    assert!(partial_support_resource(4, &[]).is_err());
    assert!(partial_support_resource(4, &[1, 1]).is_err());
    assert!(matches!(partial_support_resource(4, &[4]), Err(QtpError::IndexOutOfRange { .. })));
}

#[test]
fn qubit_pipeline_is_cnot_then_hadamard() {
    let p = PureProtocol::build(diagonal_resource(2).unwrap(), PhaseTable::pauli_n2()).unwrap();
    let expect = tensor(&hadamard(), &identity(2)) * cnot();
    assert!(max_abs_diff(p.unitary().matrix(), &expect) <= 1e-12);
}

#[test]
fn qubit_corrections_are_the_pauli_decoding_set() {
    let c2 = PhaseTable::pauli_n2();
    let expect = [identity(2), sigma_x(), sigma_z(), i_sigma_y()];
    for (idx, (s, t)) in [(0, 0), (0, 1), (1, 0), (1, 1)].into_iter().enumerate() {
        let o = correction_operator(s, t, &c2, 2).unwrap();
        assert!(max_abs_diff(o.matrix(), &expect[idx]) <= 1e-15, "O_{s}{t}");
    }
}

#[test]
fn qubit_decoding_table() {
    let (a, b) = (0.6, 0.8);
    let res = teleport_pure(&qubit(a, b), &diagonal_resource(2).unwrap(), &PhaseTable::pauli_n2()).unwrap();
    let expected = [qubit(a, b), qubit(b, a), qubit(a, -b), qubit(-b, a)];
    assert_eq!(res.outcomes.len(), 4);
    for (o, e) in res.outcomes.iter().zip(&expected) {
        assert!((o.probability - 0.25).abs() <= 1e-12);
        let got = o.uncorrected.as_ref().unwrap();
        assert!((got.amplitudes() - e.amplitudes()).norm() < 1e-12, "outcome {}{}", o.s, o.t);
        let fixed = o.corrected.as_ref().unwrap();
        assert!((fixed.amplitudes() - qubit(a, b).amplitudes()).norm() < 1e-12);
    }
}

#[test]
fn all_ones_phases_are_rejected() {
    for n in 2..=4 {
        let err = PureProtocol::build(diagonal_resource(n).unwrap(), PhaseTable::ones(n, n)).unwrap_err();
        match err {
            QtpError::InvalidPhaseTable { defect } => assert!((defect - 1.0).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }
}

#[test]
fn all_ones_corrections_are_inverse_shifts() {
    let n = 4;
    let ones = PhaseTable::ones(n, n);
    for s in 0..n {
        for k in 0..n {
            let o = correction_operator(s, k, &ones, n).unwrap();
            for m in 0..n {
                let mut col = ComplexVector::zeros(n);
                col[(m + n - k) % n] = ONE;
                assert_eq!(o.matrix().column(m).into_owned(), col);
            }
        }
    }
}

#[test]
fn correction_sweep_is_unitary() {
    let table = PhaseTable::random(4, 4, 11);
    for i in 0..4 {
        for k in 0..4 {
            assert!(correction_operator(i, k, &table, 4).unwrap().defect() < 1e-12);
        }
    }
    assert!(correction_operator(4, 0, &table, 4).is_err());
    assert!(correction_operator(0, 0, &table, 3).is_err());
}

/// Plugs the solved `b` back into `Σ_j a_jk b_ijst` and compares with the
/// right-hand side written out by hand.
fn constraint_residual(p: &PureProtocol) -> f64 {
    let (n1, n2) = (p.n1(), p.n2());
    let a = p.resource().matrix();
    let sup = p.support();
    let m = sup.len();
    let mut worst: f64 = 0.0;
    for i in 0..n1 {
        for s in 0..n1 {
            for t in 0..m {
                for (q, &k) in sup.iter().enumerate() {
                    let lhs: Complex64 = (0..n2).map(|j| a[(j, k)] * p.blocks().b(i, j, s, t)).sum();
                    let src = sup[(q + m - t) % m];
                    let rhs = if i == src { p.phases().get(s, i, t) / ((n1 * m) as f64).sqrt() } else { ZERO };
                    if sup.contains(&i) {
                        worst = worst.max((lhs - rhs).norm());
                    }
                }
            }
        }
    }
    worst
}

#[test]
fn solved_blocks_satisfy_the_constraint_and_conditions() {
    let cases = [
        (diagonal_resource(2).unwrap(), PhaseTable::pauli_n2()),
        (diagonal_resource(3).unwrap(), PhaseTable::fourier(3, 3)),
        (diagonal_resource(4).unwrap(), PhaseTable::random(4, 4, 3)),
        (diagonal_resource(5).unwrap(), PhaseTable::random(5, 5, 8)),
        (partial_support_resource(4, &[1, 2]).unwrap(), PhaseTable::fourier(4, 2)),
        (partial_support_resource(4, &[0, 3]).unwrap(), PhaseTable::random(4, 2, 1)),
        (partial_support_resource(5, &[0, 2, 4]).unwrap(), PhaseTable::random(5, 3, 2)),
    ];
    for (a, table) in cases {
        let p = PureProtocol::build(a, table).unwrap();
        assert!(constraint_residual(&p) < 1e-12);
        let r = mai_residuals(&p);
        assert!(r.orthogonality < 1e-12, "{r:?}");
        assert!(r.lambda < 1e-12, "{r:?}");
        assert!(r.maximality < 1e-12, "{r:?}");
        assert!((r.lambda_sq * (p.n1() * p.support().len()) as f64 - 1.0).abs() < 1e-15);
        assert!(p.unitary().defect() < 1e-12);
    }
}

#[test]
fn phase_permutations_keep_the_modulus_pattern() {
    let a = diagonal_resource(3).unwrap();
    let u1 = assemble_unitary(&solve_sender_blocks(&a, &PhaseTable::fourier(3, 3)).unwrap()).unwrap();
    let u2 = assemble_unitary(&solve_sender_blocks(&a, &PhaseTable::random(3, 3, 5)).unwrap()).unwrap();
    assert!(max_abs_diff(u1.matrix(), u2.matrix()) > 1e-3);
    let m1 = u1.matrix().map(|z| c(z.norm(), 0.));
    let m2 = u2.matrix().map(|z| c(z.norm(), 0.));
    assert!(max_abs_diff(&m1, &m2) < 1e-12);
}

#[test]
fn fourier_corrections_are_adjoint_weyl_operators() {
    for n in 2..=5 {
        let basis = crate::weyl::WeylBasis::new(n).unwrap();
        let table = PhaseTable::fourier(n, n);
        for (s, t) in basis.labels() {
            let o = correction_operator(s, t, &table, n).unwrap();
            let u = basis.op(s, t).unwrap();
            assert!(max_abs_diff(o.matrix(), &u.matrix().adjoint()) < 1e-12);
        }
    }
}

#[test]
fn random_inputs_are_recovered() {
    for n in 2..=5 {
        let a = diagonal_resource(n).unwrap();
        for k in 0..100u64 {
            let table = PhaseTable::random(n, n, 1000 + k);
            let psi = haar_random_state(n, k);
            let res = teleport_pure(&psi, &a, &table).unwrap();
            assert!(res.worst_recovery_defect() <= 1e-10);
            assert!((res.total_probability() - 1.0).abs() <= 1e-12);
            for o in &res.outcomes {
                assert!((o.probability - 1.0 / (n * n) as f64).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn basis_input_is_returned_by_every_outcome() {
    for n in 2..=4 {
        let res =
            teleport_pure(&StateVector::basis(n, 0).unwrap(), &diagonal_resource(n).unwrap(), &PhaseTable::fourier(n, n))
                .unwrap();
        assert!(res.worst_recovery_defect() <= 1e-12);
    }
}

#[test]
fn epr_pair_through_partial_support() {
    let a = partial_support_resource(4, &[1, 2]).unwrap();
    let table = PhaseTable::fourier(4, 2);
    let mut rng = stream_rng(77, 0);
    for _ in 0..100 {
        let x = haar_state_pair(&mut rng);
        // a|01⟩ + b|10⟩ sits at indices 1 and 2 of the 4-level input
        let mut v = ComplexVector::zeros(4);
        v[1] = x[0];
        v[2] = x[1];
        let psi = StateVector::new(v).unwrap();
        let res = teleport_pure(&psi, &a, &table).unwrap();
        assert_eq!(res.outcomes.len(), 8);
        for o in &res.outcomes {
            assert!((o.probability - 0.125).abs() <= 1e-12);
        }
        assert!(res.worst_recovery_defect() <= 1e-10);
    }
}

fn haar_state_pair(rng: &mut rand_chacha::ChaCha8Rng) -> ComplexVector {
    crate::linalg::random::haar_state_with(2, rng).into_amplitudes()
}

#[test]
fn ghz_resource_teleports_its_support() {
    let a = partial_support_resource(4, &[0, 3]).unwrap();
    let mut v = ComplexVector::zeros(4);
    v[0] = c(0.6, 0.0);
    v[3] = c(0.0, 0.8);
    let res = teleport_pure(&StateVector::new(v).unwrap(), &a, &PhaseTable::random(4, 2, 6)).unwrap();
    assert!(res.worst_recovery_defect() <= 1e-12);
}

#[test]
fn input_outside_support_is_rejected() {
    let a = partial_support_resource(4, &[1, 2]).unwrap();
    let psi = StateVector::basis(4, 0).unwrap();
    assert!(matches!(
        teleport_pure(&psi, &a, &PhaseTable::fourier(4, 2)),
        Err(QtpError::SupportViolation { leaked }) if (leaked - 1.0).abs() < 1e-15
    ));
}

#[test]
fn embedding_into_a_larger_ancilla() {
    // N2 = 3 > m = 2: the spare row of A is empty
    let mut a = ComplexMatrix::zeros(3, 2);
    let r = 1.0 / 2f64.sqrt();
    a[(0, 0)] = c(r, 0.);
    a[(2, 1)] = c(r, 0.);
    let a = ResourceCoefficients::new(a).unwrap();
    let p = PureProtocol::build(a, PhaseTable::fourier(2, 3)).unwrap();
    assert!(p.unitary().defect() < 1e-12);
    let res = p.teleport(&qubit(0.6, 0.8)).unwrap();
    assert!(res.worst_recovery_defect() <= 1e-12);
    let impossible = res.outcomes.iter().filter(|o| o.probability == 0.0).count();
    assert_eq!(impossible, 2);
}

#[test]
fn rotated_maximally_entangled_resource_is_solved_generically() {
    for n in 2..=4 {
        let v = haar_random_unitary(n, 40 + n as u64);
        let a = ResourceCoefficients::new(v.matrix().unscale((n as f64).sqrt())).unwrap();
        let p = PureProtocol::build(a, PhaseTable::random(n, n, 2)).unwrap();
        assert!(constraint_residual(&p) < 1e-12);
        let r = mai_residuals(&p);
        assert!(r.orthogonality < 1e-12 && r.lambda < 1e-12 && r.maximality < 1e-12);
        let res = p.teleport(&haar_random_state(n, 3)).unwrap();
        assert!(res.worst_recovery_defect() <= 1e-10);
    }
}

#[test]
fn non_maximal_resource_is_unsolvable() {
    let a = ResourceCoefficients::from_schmidt_weights(&[0.6, 0.4]).unwrap();
    match PureProtocol::build(a, PhaseTable::pauli_n2()).unwrap_err() {
        QtpError::UnsolvableResource { defect, .. } => assert!((defect - 0.2).abs() < 1e-12),
        other => panic!("unexpected {other:?}"),
    }
    // same weights in a rotated basis take the generic path
    let v = haar_random_unitary(2, 9);
    let w = haar_random_unitary(2, 10);
    let d = ResourceCoefficients::from_schmidt_weights(&[0.6, 0.4]).unwrap();
    let rotated = ResourceCoefficients::new(v.matrix() * d.matrix() * w.matrix()).unwrap();
    match PureProtocol::build(rotated, PhaseTable::pauli_n2()).unwrap_err() {
        QtpError::UnsolvableResource { defect, .. } => assert!((defect - 0.2).abs() < 1e-10),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn necessity_verdicts() {
    assert!(maximality_necessity_check(&[0.5, 0.5]).solvable);
    let product = maximality_necessity_check(&[1.0, 0.0]);
    assert!(!product.solvable);
    assert!((product.defect - 1.0).abs() < 1e-15);
    for n in 1..=6 {
        assert!(maximality_necessity_check(&vec![1.0 / n as f64; n]).solvable);
    }
    assert!(!maximality_necessity_check(&[]).solvable);
}

/// Forces the constraint on `A = diag(√λ)` for every phase assignment on a
/// `2π/32` grid of the two free signs and measures how far the resulting
/// sender columns are from unit length. The best achievable value is the
/// necessity defect.
#[test]
fn necessity_defect_matches_grid_scan() {
    let lambdas = [0.6, 0.4];
    let verdict = maximality_necessity_check(&lambdas);
    assert!(!verdict.solvable);
    let steps = 32;
    let mut best = f64::INFINITY;
    let mut best_unitarity = f64::INFINITY;
    for g0 in 0..steps {
        for g1 in 0..steps {
            let phase = |g: usize| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * g as f64 / steps as f64);
            let cfun = |s: usize, i: usize, t: usize| {
                if s == 1 && i == 1 {
                    -phase(if t == 0 { g0 } else { g1 })
                } else {
                    phase(0)
                }
            };
            // b_{i,k,s,t} = δ_{i,(k−t) mod 2} c_{s,i,t} / (2 √λ_k)
            let mut u = ComplexMatrix::zeros(4, 4);
            for i in 0..2 {
                for k in 0..2 {
                    for s in 0..2 {
                        for t in 0..2 {
                            if i == (k + 2 - t) % 2 {
                                u[(s * 2 + t, i * 2 + k)] = cfun(s, i, t) / (2.0 * lambdas[k].sqrt());
                            }
                        }
                    }
                }
            }
            let col_defect = (0..4)
                .map(|col| (1.0 / u.column(col).norm_squared() - 1.0).abs())
                .fold(0.0, f64::max);
            best = best.min(col_defect);
            best_unitarity = best_unitarity.min(crate::linalg::unitarity_defect(&u));
        }
    }
    assert!((best - verdict.defect).abs() < 1e-12, "grid {best} vs {}", verdict.defect);
    assert!(best_unitarity > 0.1);
}

#[test]
fn dimension_checks() {
    let a = diagonal_resource(3).unwrap();
    assert!(matches!(PureProtocol::build(a.clone(), PhaseTable::fourier(2, 2)), Err(QtpError::DimensionMismatch(_))));
    let p = PureProtocol::build(a, PhaseTable::fourier(3, 3)).unwrap();
    assert!(p.teleport(&qubit(0.6, 0.8)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn recovery_for_any_seed(n in 2usize..6, psi_seed in any::<u64>(), table_seed in any::<u64>()) {
        let res = teleport_pure(
            &haar_random_state(n, psi_seed),
            &diagonal_resource(n).unwrap(),
            &PhaseTable::random(n, n, table_seed),
        ).unwrap();
        prop_assert!(res.worst_recovery_defect() <= 1e-10);
        prop_assert!((res.total_probability() - 1.0).abs() <= 1e-12);
    }
}
