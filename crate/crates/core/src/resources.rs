//! Parametrized resource and input states, ensembles, and the named-state
//! grammar used by the CLI.
//!
//! Descriptors read `family:key=value,...`. A bare token after a list-valued
//! key extends that key, so `bell-diagonal:n=2,w=0,1,0,0` sets four weights.
//! `rotated` takes the wrapped descriptor last: `rotated:side=right,u=weyl:0:1,of=bell:n=2`.

use std::collections::BTreeMap;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{dim_mismatch, QtpError, Result};
use crate::linalg::MatrixJson;
use crate::linalg::{
    haar_random_state, haar_random_unitary, identity, max_entangled_vector, random_density_matrix, tensor,
    ComplexMatrix, ComplexVector, DensityOperator, StateVector, UnitaryOperator,
};
use crate::weyl::WeylBasis;

const WEIGHT_TOL: f64 = 1e-12;
/// Largest norm defect that is silently repaired for typed amplitudes.
pub const RENORMALIZE_LIMIT: f64 = 1e-6;

fn check_n(n: usize) -> Result<()> {
    if n < 2 {
        return Err(QtpError::InvalidParameter(format!("dimension must be at least 2, got {n}")));
    }
    Ok(())
}

/// `F|Φ⟩⟨Φ| + (1−F)/(n²−1) (I − |Φ⟩⟨Φ|)`.
pub fn isotropic(n: usize, f: f64) -> Result<DensityOperator> {
    check_n(n)?;
    if !(0.0..=1.0).contains(&f) {
        return Err(QtpError::InvalidParameter(format!("singlet fraction {f} outside [0, 1]")));
    }
    let phi = max_entangled_vector(n);
    let p = &phi * phi.adjoint();
    let d = n * n;
    let m = p.scale(f) + (identity(d) - &p).scale((1.0 - f) / (d as f64 - 1.0));
    DensityOperator::new(m, vec![n, n])
}

/// `Σ w_st |Φ_st⟩⟨Φ_st|` with weights flattened `s·n + t`.
pub fn bell_diagonal(n: usize, weights: &[f64]) -> Result<DensityOperator> {
    check_n(n)?;
    if weights.len() != n * n {
        return Err(dim_mismatch(format!("{} weights for n = {n}, need {}", weights.len(), n * n)));
    }
    check_weights(weights)?;
    let basis = WeylBasis::new(n)?;
    let d = n * n;
    let mut m = ComplexMatrix::zeros(d, d);
    for (w, bell) in weights.iter().zip(basis.bells()) {
        if *w != 0.0 {
            m += bell.projector().scale(*w);
        }
    }
    DensityOperator::new(m, vec![n, n])
}

fn check_weights(weights: &[f64]) -> Result<()> {
    if let Some(w) = weights.iter().find(|w| !(0.0..=1.0).contains(*w)) {
        return Err(QtpError::InvalidParameter(format!("weight {w} outside [0, 1]")));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_TOL {
        return Err(QtpError::InvalidParameter(format!("weights sum to {sum}, not 1")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

/// `(1⊗W)χ(1⊗W†)` for `Right`, `(W⊗1)χ(W†⊗1)` for `Left`.
pub fn rotated(chi: &DensityOperator, w: &UnitaryOperator, side: Side) -> Result<DensityOperator> {
    let n = chi.bipartite_side()?;
    if w.dim() != n {
        return Err(dim_mismatch(format!("rotation is {}x{}, resource side is {n}", w.dim(), w.dim())));
    }
    let full = match side {
        Side::Right => tensor(&identity(n), w.matrix()),
        Side::Left => tensor(w.matrix(), &identity(n)),
    };
    let m = &full * chi.matrix() * full.adjoint();
    // similarity by a unitary; restore exact Hermiticity lost to roundoff
    let m = (&m + m.adjoint()).scale(0.5);
    DensityOperator::new(m, chi.dims().to_vec())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleMember {
    pub weight: f64,
    pub state: StateVector,
}

/// `χ = Σ p_α |Ψ_α⟩⟨Ψ_α|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    /// Subsystem dims; `[n, n]` is assumed when omitted and the dimension is a square.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<Vec<usize>>,
    pub members: Vec<EnsembleMember>,
}

impl EnsembleSpec {
    pub fn resolved_dims(&self) -> Result<Vec<usize>> {
        let first = self
            .members
            .first()
            .ok_or_else(|| QtpError::InvalidParameter("ensemble has no members".into()))?;
        let d = first.state.dim();
        if let Some(dims) = &self.dims {
            return Ok(dims.clone());
        }
        let n = (d as f64).sqrt().round() as usize;
        if n * n == d {
            Ok(vec![n, n])
        } else {
            Ok(vec![d])
        }
    }
}

pub fn from_ensemble(spec: &EnsembleSpec) -> Result<DensityOperator> {
    let dims = spec.resolved_dims()?;
    let weights: Vec<f64> = spec.members.iter().map(|m| m.weight).collect();
    check_weights(&weights)?;
    let d = spec.members[0].state.dim();
    let mut m = ComplexMatrix::zeros(d, d);
    for member in &spec.members {
        if member.state.dim() != d {
            return Err(dim_mismatch(format!("ensemble member of dim {} next to dim {d}", member.state.dim())));
        }
        m += member.state.projector().scale(member.weight);
    }
    DensityOperator::new(m, dims)
}

/// A parsed `family:key=value,...` descriptor.
#[derive(Debug, Clone, PartialEq)]
struct Descriptor {
    family: String,
    params: BTreeMap<String, Vec<String>>,
    /// Everything after `of=`, kept verbatim.
    nested: Option<String>,
}

fn parse_err(desc: &str, msg: impl std::fmt::Display) -> QtpError {
    QtpError::Parse(format!("descriptor '{desc}': {msg}"))
}

impl Descriptor {
    fn parse(desc: &str) -> Result<Self> {
        let (family, body) = desc.split_once(':').unwrap_or((desc, ""));
        let family = family.trim().to_ascii_lowercase();
        if family.is_empty() {
            return Err(parse_err(desc, "missing family"));
        }
        let mut params: BTreeMap<String, Vec<String>> = BTreeMap::new();
        let mut nested = None;
        let mut last_key: Option<String> = None;
        let mut rest = body;
        while !rest.is_empty() {
            if let Some(inner) = rest.strip_prefix("of=") {
                nested = Some(inner.to_string());
                break;
            }
            let (token, tail) = rest.split_once(',').unwrap_or((rest, ""));
            rest = tail;
            let token = token.trim();
            if token.is_empty() {
                return Err(parse_err(desc, "empty field"));
            }
            match token.split_once('=') {
                Some((k, v)) => {
                    let k = k.trim().to_string();
                    if params.contains_key(&k) {
                        return Err(parse_err(desc, format!("key '{k}' repeated")));
                    }
                    params.insert(k.clone(), vec![v.trim().to_string()]);
                    last_key = Some(k);
                }
                None => match &last_key {
                    Some(k) => params.get_mut(k).expect("key inserted").push(token.to_string()),
                    None => return Err(parse_err(desc, format!("value '{token}' has no key"))),
                },
            }
        }
        Ok(Self { family, params, nested })
    }

    fn single(&self, desc: &str, key: &str) -> Result<Option<&str>> {
        match self.params.get(key).map(Vec::as_slice) {
            None => Ok(None),
            Some([v]) => Ok(Some(v.as_str())),
            Some(_) => Err(parse_err(desc, format!("key '{key}' takes one value"))),
        }
    }

    fn required<T: std::str::FromStr>(&self, desc: &str, key: &str) -> Result<T> {
        let v = self.single(desc, key)?.ok_or_else(|| parse_err(desc, format!("missing '{key}'")))?;
        v.parse().map_err(|_| parse_err(desc, format!("bad value '{v}' for '{key}'")))
    }

    fn optional<T: std::str::FromStr>(&self, desc: &str, key: &str) -> Result<Option<T>> {
        match self.single(desc, key)? {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| parse_err(desc, format!("bad value '{v}' for '{key}'"))),
        }
    }

    fn floats(&self, desc: &str, key: &str) -> Result<Option<Vec<f64>>> {
        let Some(values) = self.params.get(key) else { return Ok(None) };
        values
            .iter()
            .map(|v| {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| parse_err(desc, format!("bad number '{v}' for '{key}'")))
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    fn expect_keys(&self, desc: &str, allowed: &[&str]) -> Result<()> {
        if let Some(k) = self.params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(parse_err(desc, format!("unknown key '{k}' for family '{}'", self.family)));
        }
        if self.nested.is_some() && self.family != "rotated" {
            return Err(parse_err(desc, "'of=' is only valid for 'rotated'"));
        }
        Ok(())
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn file_path<'a>(desc: &str, path: &'a str) -> Result<&'a Path> {
    if path.is_empty() {
        return Err(parse_err(desc, "missing file path"));
    }
    Ok(Path::new(path))
}

fn looks_like_path(desc: &str) -> bool {
    const FILE_FAMILIES: [&str; 3] = ["raw-file:", "ensemble-file:", "state-file:"];
    desc.ends_with(".json") && !desc.contains('=') && !FILE_FAMILIES.iter().any(|f| desc.starts_with(f))
}

/// Parses a unitary spec: `id:N`, `weyl:S:T` (dimension from context),
/// `haar:SEED`, or `file:PATH`.
fn parse_unitary(desc: &str, spec: &str, n: usize) -> Result<UnitaryOperator> {
    let parts: Vec<&str> = spec.splitn(2, ':').collect();
    let num = |s: &str| s.parse::<u64>().map_err(|_| parse_err(desc, format!("bad unitary '{spec}'")));
    match parts.as_slice() {
        ["id"] => Ok(UnitaryOperator::identity(n)),
        ["weyl", st] => {
            let (s, t) = st.split_once(':').ok_or_else(|| parse_err(desc, "weyl needs S:T"))?;
            let basis = WeylBasis::new(n)?;
            Ok(basis.op(num(s)? as usize, num(t)? as usize)?.clone())
        }
        ["haar", seed] => Ok(haar_random_unitary(n, num(seed)?)),
        ["file", path] => {
            let m: MatrixJson = read_json(Path::new(path))?;
            UnitaryOperator::try_from(m)
        }
        _ => Err(parse_err(desc, format!("unknown unitary '{spec}'"))),
    }
}

/// Builds a bipartite resource from a descriptor.
///
/// Families: `isotropic:n,F`, `bell-diagonal:n,w`, `bell:n,s,t`,
/// `mixed:n`, `random:n,seed`, `rotated:side,u,of`, `ensemble-file:PATH`,
/// `raw-file:PATH`, or a bare `*.json` path.
pub fn parse_resource(desc: &str) -> Result<DensityOperator> {
    let desc = desc.trim();
    if let Some(path) = desc.strip_prefix("ensemble-file:") {
        return from_ensemble(&read_json(file_path(desc, path)?)?);
    }
    if let Some(path) = desc.strip_prefix("raw-file:").or(looks_like_path(desc).then_some(desc)) {
        let chi: DensityOperator = read_json(file_path(desc, path)?)?;
        chi.bipartite_side()?;
        return Ok(chi);
    }
    let d = Descriptor::parse(desc)?;
    let chi = match d.family.as_str() {
        "isotropic" => {
            d.expect_keys(desc, &["n", "F", "f"])?;
            let f = match d.optional::<f64>(desc, "F")? {
                Some(f) => f,
                None => d.required(desc, "f")?,
            };
            isotropic(d.required(desc, "n")?, f)?
        }
        "bell-diagonal" => {
            d.expect_keys(desc, &["n", "w"])?;
            let w = d.floats(desc, "w")?.ok_or_else(|| parse_err(desc, "missing 'w'"))?;
            let n = match d.optional(desc, "n")? {
                Some(n) => n,
                None => (w.len() as f64).sqrt().round() as usize,
            };
            bell_diagonal(n, &w)?
        }
        "bell" => {
            d.expect_keys(desc, &["n", "s", "t"])?;
            let n = d.required(desc, "n")?;
            check_n(n)?;
            let basis = WeylBasis::new(n)?;
            let s = d.optional(desc, "s")?.unwrap_or(0);
            let t = d.optional(desc, "t")?.unwrap_or(0);
            basis.bell(s, t)?.to_density(vec![n, n])?
        }
        "mixed" => {
            d.expect_keys(desc, &["n"])?;
            let n = d.required(desc, "n")?;
            check_n(n)?;
            DensityOperator::maximally_mixed(vec![n, n])?
        }
        "random" => {
            d.expect_keys(desc, &["n", "seed"])?;
            let n = d.required(desc, "n")?;
            check_n(n)?;
            random_density_matrix(&[n, n], d.optional(desc, "seed")?.unwrap_or(0))
        }
        "rotated" => {
            d.expect_keys(desc, &["side", "u"])?;
            let inner = d.nested.as_deref().ok_or_else(|| parse_err(desc, "missing 'of=' (must come last)"))?;
            let chi = parse_resource(inner)?;
            let n = chi.bipartite_side()?;
            let side = match d.single(desc, "side")?.unwrap_or("right") {
                "right" => Side::Right,
                "left" => Side::Left,
                other => return Err(parse_err(desc, format!("side '{other}' is neither left nor right"))),
            };
            let u = parse_unitary(desc, d.single(desc, "u")?.ok_or_else(|| parse_err(desc, "missing 'u'"))?, n)?;
            rotated(&chi, &u, side)?
        }
        other => return Err(parse_err(desc, format!("unknown resource family '{other}'"))),
    };
    chi.bipartite_side()?;
    Ok(chi)
}

/// Channel input parsed from a descriptor.
#[derive(Debug, Clone, PartialEq)]
pub enum InputState {
    Pure(StateVector),
    Mixed(DensityOperator),
}

impl InputState {
    pub fn dim(&self) -> usize {
        match self {
            InputState::Pure(s) => s.dim(),
            InputState::Mixed(rho) => rho.side(),
        }
    }

    pub fn density(&self) -> Result<DensityOperator> {
        match self {
            InputState::Pure(s) => s.to_density(vec![s.dim()]),
            InputState::Mixed(rho) => Ok(rho.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedInput {
    pub state: InputState,
    /// `|‖ψ‖ − 1|` before renormalization; zero for generated states.
    pub norm_defect: f64,
}

/// Normalizes typed amplitudes when their norm is within `1e-6` of one.
pub fn renormalize(amplitudes: ComplexVector) -> Result<(StateVector, f64)> {
    let norm = amplitudes.norm();
    let defect = (norm - 1.0).abs();
    if !(defect <= RENORMALIZE_LIMIT) {
        return Err(QtpError::InvalidState(format!(
            "amplitude norm {norm} is off by {defect:.3e}, more than {RENORMALIZE_LIMIT:e}"
        )));
    }
    let (state, _) = StateVector::normalized(amplitudes)?;
    Ok((state, defect))
}

/// Builds a single-system input from a descriptor.
///
/// Families: `basis:n,k`, `haar:n,seed`, `amplitudes:re,im`, `mixed:n`,
/// `random:n,seed`, `state-file:PATH`, `raw-file:PATH`, or a bare `*.json`
/// density file.
pub fn parse_input(desc: &str) -> Result<ParsedInput> {
    let desc = desc.trim();
    let pure = |s: StateVector| ParsedInput { state: InputState::Pure(s), norm_defect: 0.0 };
    let mixed = |r: DensityOperator| ParsedInput { state: InputState::Mixed(r), norm_defect: 0.0 };
    if looks_like_path(desc) {
        return Ok(mixed(read_json(Path::new(desc))?));
    }
    if let Some(path) = desc.strip_prefix("state-file:") {
        return Ok(pure(read_json(file_path(desc, path)?)?));
    }
    if let Some(path) = desc.strip_prefix("raw-file:") {
        return Ok(mixed(read_json(file_path(desc, path)?)?));
    }
    let d = Descriptor::parse(desc)?;
    Ok(match d.family.as_str() {
        "basis" => {
            d.expect_keys(desc, &["n", "k"])?;
            pure(StateVector::basis(d.required(desc, "n")?, d.optional(desc, "k")?.unwrap_or(0))?)
        }
        "haar" => {
            d.expect_keys(desc, &["n", "seed"])?;
            let n: usize = d.required(desc, "n")?;
            if n == 0 {
                return Err(QtpError::InvalidParameter("dimension must be positive".into()));
            }
            pure(haar_random_state(n, d.optional(desc, "seed")?.unwrap_or(0)))
        }
        "amplitudes" => {
            d.expect_keys(desc, &["re", "im"])?;
            let re = d.floats(desc, "re")?.ok_or_else(|| parse_err(desc, "missing 're'"))?;
            let im = d.floats(desc, "im")?.unwrap_or_else(|| vec![0.0; re.len()]);
            if im.len() != re.len() {
                return Err(dim_mismatch(format!("{} real parts but {} imaginary parts", re.len(), im.len())));
            }
            let v = ComplexVector::from_iterator(re.len(), re.iter().zip(&im).map(|(a, b)| Complex64::new(*a, *b)));
            let (state, norm_defect) = renormalize(v)?;
            ParsedInput { state: InputState::Pure(state), norm_defect }
        }
        "mixed" => {
            d.expect_keys(desc, &["n"])?;
            mixed(DensityOperator::maximally_mixed(vec![d.required(desc, "n")?])?)
        }
        "random" => {
            d.expect_keys(desc, &["n", "seed"])?;
            let n: usize = d.required(desc, "n")?;
            if n == 0 {
                return Err(QtpError::InvalidParameter("dimension must be positive".into()));
            }
            mixed(random_density_matrix(&[n], d.optional(desc, "seed")?.unwrap_or(0)))
        }
        other => return Err(parse_err(desc, format!("unknown input family '{other}'"))),
    })
}
