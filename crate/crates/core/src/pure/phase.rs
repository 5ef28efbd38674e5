use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{QtpError, Result};
use crate::linalg::{identity, max_abs_diff, stream_rng, ComplexMatrix};
use crate::weyl::omega_pow;

const UNIMODULAR_TOL: f64 = 1e-12;

/// Unimodular phases `c[s][i][t]` with `s, i < n1` and `t < n2`.
///
/// A table only yields a unitary sender transformation when every slice
/// `c[·][·][t] / √n1` is unitary, i.e. each slice is a complex Hadamard
/// matrix. See [`PhaseTable::hadamard_defect`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PhaseTableJson", into = "PhaseTableJson")]
pub struct PhaseTable {
    n1: usize,
    n2: usize,
    values: Vec<Complex64>,
}

impl PhaseTable {
    /// Builds a table from values laid out as `(s·n1 + i)·n2 + t`.
    pub fn new(n1: usize, n2: usize, values: Vec<Complex64>) -> Result<Self> {
        if n1 == 0 || n2 == 0 {
            return Err(QtpError::InvalidParameter("phase table dimensions must be positive".into()));
        }
        if values.len() != n1 * n1 * n2 {
            return Err(QtpError::InvalidParameter(format!(
                "phase table {n1}x{n1}x{n2} needs {} entries, got {}",
                n1 * n1 * n2,
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|c| !((c.norm() - 1.0).abs() <= UNIMODULAR_TOL)) {
            return Err(QtpError::InvalidParameter(format!("phase {bad} is not unimodular")));
        }
        Ok(Self { n1, n2, values })
    }

    fn from_fn(n1: usize, n2: usize, f: impl Fn(usize, usize, usize) -> Complex64) -> Self {
        let mut values = Vec::with_capacity(n1 * n1 * n2);
        for s in 0..n1 {
            for i in 0..n1 {
                for t in 0..n2 {
                    values.push(f(s, i, t));
                }
            }
        }
        Self { n1, n2, values }
    }

    /// Every phase equal to 1. Satisfies unimodularity but is never a
    /// complex Hadamard table, so protocols built from it are rejected.
    pub fn ones(n1: usize, n2: usize) -> Self {
        Self::from_fn(n1, n2, |_, _, _| Complex64::new(1.0, 0.0))
    }

    /// `c[s][i][t] = ω^{s·i}` with `ω = exp(−2πi/n1)`. The matching
    /// corrections are the adjoint Weyl operators.
    pub fn fourier(n1: usize, n2: usize) -> Self {
        Self::from_fn(n1, n2, |s, i, _| omega_pow(n1, (s * i) as i64))
    }

    /// Qubit table with `c[1][1][0] = c[1][1][1] = −1` and all other
    /// phases 1. It reproduces the CNOT + Hadamard circuit.
    pub fn pauli_n2() -> Self {
        Self::from_fn(2, 2, |s, i, _| {
            if s == 1 && i == 1 {
                Complex64::new(-1.0, 0.0)
            } else {
                Complex64::new(1.0, 0.0)
            }
        })
    }

    /// Random valid table: each slice is `D₁ P F D₂` with random diagonal
    /// phases `D₁, D₂`, a random row permutation `P` and the Fourier matrix.
    pub fn random(n1: usize, n2: usize, seed: u64) -> Self {
        let mut rng = stream_rng(seed, 0);
        let mut slices = Vec::with_capacity(n2);
        for _ in 0..n2 {
            let mut perm: Vec<usize> = (0..n1).collect();
            perm.shuffle(&mut rng);
            let row: Vec<f64> = (0..n1).map(|_| rng.random::<f64>()).collect();
            let col: Vec<f64> = (0..n1).map(|_| rng.random::<f64>()).collect();
            slices.push((perm, row, col));
        }
        Self::from_fn(n1, n2, |s, i, t| {
            let (perm, row, col) = &slices[t];
            let phase = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * (row[s] + col[i]));
            phase * omega_pow(n1, (perm[s] * i) as i64)
        })
    }

    /// Named presets: `ones`, `fourier`, `pauli-n2` (needs `n1 = n2 = 2`)
    /// and `random:SEED`.
    pub fn preset(name: &str, n1: usize, n2: usize) -> Result<Self> {
        match name {
            "ones" => Ok(Self::ones(n1, n2)),
            "fourier" => Ok(Self::fourier(n1, n2)),
            "pauli-n2" => {
                if (n1, n2) != (2, 2) {
                    return Err(QtpError::InvalidParameter(format!(
                        "preset pauli-n2 is 2x2x2, requested {n1}x{n1}x{n2}"
                    )));
                }
                Ok(Self::pauli_n2())
            }
            other => match other.strip_prefix("random:") {
                Some(seed) => {
                    let seed = seed.parse::<u64>().map_err(|e| QtpError::Parse(format!("random seed {seed:?}: {e}")))?;
                    Ok(Self::random(n1, n2, seed))
                }
                None => Err(QtpError::Parse(format!("unknown phase preset {other:?}"))),
            },
        }
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn get(&self, s: usize, i: usize, t: usize) -> Complex64 {
        self.values[(s * self.n1 + i) * self.n2 + t]
    }

    /// Slice `c[·][·][t]` as an `n1 × n1` matrix with rows `s`, columns `i`.
    pub fn slice(&self, t: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.n1, self.n1, |s, i| self.get(s, i, t))
    }

    /// `max |C_t† C_t / n1 − I|` for slice `t`.
    pub fn hadamard_defect(&self, t: usize) -> f64 {
        let c = self.slice(t);
        max_abs_diff(&(c.adjoint() * &c).unscale(self.n1 as f64), &identity(self.n1))
    }
}

#[derive(Serialize, Deserialize)]
struct PhaseTableJson(Vec<Vec<Vec<[f64; 2]>>>);

impl From<PhaseTable> for PhaseTableJson {
    fn from(c: PhaseTable) -> Self {
        PhaseTableJson(
            (0..c.n1)
                .map(|s| {
                    (0..c.n1)
                        .map(|i| {
                            (0..c.n2)
                                .map(|t| {
                                    let v = c.get(s, i, t);
                                    [v.re, v.im]
                                })
                                .collect()
                        })
                        .collect()
                })
                .collect(),
        )
    }
}

impl TryFrom<PhaseTableJson> for PhaseTable {
    type Error = QtpError;

    fn try_from(json: PhaseTableJson) -> Result<Self> {
        let n1 = json.0.len();
        let n2 = json.0.first().and_then(|a| a.first()).map_or(0, Vec::len);
        let mut values = Vec::with_capacity(n1 * n1 * n2);
        for plane in &json.0 {
            if plane.len() != n1 {
                return Err(QtpError::Parse("phase table is not n1 x n1 x n2".into()));
            }
            for row in plane {
                if row.len() != n2 {
                    return Err(QtpError::Parse("phase table is not n1 x n1 x n2".into()));
                }
                values.extend(row.iter().map(|&[re, im]| Complex64::new(re, im)));
            }
        }
        PhaseTable::new(n1, n2, values)
    }
}
