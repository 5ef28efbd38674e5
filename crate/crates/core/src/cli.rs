//! Batch command-line front end: `analyze`, `teleport`, `pure` and `verify`.
//!
//! Exit codes: 0 success, 1 verification failure, 2 parse or I/O error,
//! 3 invalid state or dimension mismatch, 4 oracle mismatch, 5 unsolvable
//! resource or invalid phase table.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{apply_general, apply_optimal, apply_standard, simulate_protocol, CorrectionFamily};
use crate::error::{QtpError, Result};
use crate::fidelity::{analyze_resource, fully_entangled_fraction, OptimizerConfig, ResourceAnalysis};
use crate::linalg::{max_abs_diff, ComplexMatrix, DensityOperator, StateVector, UnitaryOperator};
use crate::pure::{diagonal_resource, partial_support_resource, PhaseTable, PureProtocol};
use crate::resources::{parse_input, parse_resource, InputState};
use crate::verify::{run_verify, CheckResult, VerifyConfig};
use crate::weyl::WeylBasis;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const ANALYSIS_SCHEMA: &str = "qtp.analysis.v1";
pub const TELEPORT_SCHEMA: &str = "qtp.teleport.v1";
pub const PURE_SCHEMA: &str = "qtp.pure.v1";
pub const VERIFY_SCHEMA: &str = "qtp.verify.v1";
/// Largest tolerated entrywise gap between the closed form and the oracle.
pub const ORACLE_TOL: f64 = 1e-10;

pub const EXIT_VERIFY_FAILED: u8 = 1;
pub const EXIT_PARSE: u8 = 2;
pub const EXIT_INVALID: u8 = 3;
pub const EXIT_ORACLE: u8 = 4;
pub const EXIT_UNSOLVABLE: u8 = 5;

pub fn exit_code(e: &QtpError) -> u8 {
    match e {
        QtpError::Parse(_) | QtpError::Json(_) | QtpError::Io(_) => EXIT_PARSE,
        QtpError::UnsolvableResource { .. } | QtpError::InvalidPhaseTable { .. } | QtpError::SupportViolation { .. } => {
            EXIT_UNSOLVABLE
        }
        _ => EXIT_INVALID,
    }
}

#[derive(Debug, Parser)]
#[command(name = "qtp", version, about = "Qudit teleportation channels, fidelities and protocol checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Print the JSON report instead of a table.
    #[arg(long, global = true)]
    pub json: bool,
    /// Also write the JSON report to this path (atomically).
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, env = "QTP_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Singlet fraction, fully entangled fraction and both fidelities of a resource.
    Analyze(AnalyzeArgs),
    /// Send an input state through the channel induced by a resource.
    Teleport(TeleportArgs),
    /// Build a pure-resource protocol and list every measurement outcome.
    Pure(PureArgs),
    /// Run the self-check suite and print one JSON line per check.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct OptimizerArgs {
    #[arg(long, default_value_t = 20)]
    pub restarts: usize,
    /// Haar samples in the optimizer's safeguard scan.
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 2000)]
    pub max_iterations: usize,
}

impl OptimizerArgs {
    fn config(&self, seed: u64) -> OptimizerConfig {
        OptimizerConfig {
            restarts: self.restarts,
            max_iterations: self.max_iterations,
            safeguard_samples: self.samples,
            seed,
            ..OptimizerConfig::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Resource descriptor, e.g. `isotropic:n=2,F=0.8`, or a JSON file.
    #[arg(long)]
    pub resource: String,
    #[command(flatten)]
    pub optimizer: OptimizerArgs,
    /// Record wall time in the report (makes output run-dependent).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct TeleportArgs {
    /// Resource descriptor or JSON file.
    #[arg(long)]
    pub resource: String,
    /// Input descriptor, e.g. `haar:n=2,seed=1`.
    #[arg(long)]
    pub state: String,
    /// `standard`, `optimal`, or a JSON correction family file.
    #[arg(long, default_value = "standard")]
    pub protocol: String,
    /// Cross-check against the brute-force protocol simulation.
    #[arg(long)]
    pub oracle: bool,
    #[command(flatten)]
    pub optimizer: OptimizerArgs,
}

#[derive(Debug, Args)]
pub struct PureArgs {
    /// Dimension of the input system.
    #[arg(long)]
    pub n: usize,
    /// Phase preset: `fourier`, `pauli-n2`, `ones` or `random:SEED`.
    #[arg(long, default_value = "fourier")]
    pub preset: String,
    /// Comma-separated basis indices of a partial-support resource.
    #[arg(long, value_delimiter = ',')]
    pub support: Option<Vec<usize>>,
    /// Pure input descriptor, e.g. `amplitudes:re=0.6,0.8`.
    #[arg(long)]
    pub state: String,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 2)]
    pub n_min: usize,
    #[arg(long, default_value_t = 4)]
    pub n_max: usize,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 4)]
    pub restarts: usize,
    #[arg(long, hide = true)]
    pub flip_omega: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub schema: String,
    pub tool_version: String,
    pub input: String,
    pub seed: u64,
    pub analysis: ResourceAnalysis,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeleportReport {
    pub schema: String,
    pub tool_version: String,
    pub resource: String,
    pub state: String,
    pub protocol: String,
    pub seed: u64,
    pub rho_in: DensityOperator,
    pub rho_out: DensityOperator,
    /// `tr(ρ_in ρ_out)`.
    pub overlap: f64,
    pub trace_defect: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fef: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PureOutcomeReport {
    pub s: usize,
    pub t: usize,
    pub probability: f64,
    pub uncorrected: Option<StateVector>,
    pub correction_label: String,
    pub correction: UnitaryOperator,
    pub corrected: Option<StateVector>,
    pub recovery_fidelity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PureReport {
    pub schema: String,
    pub tool_version: String,
    pub n1: usize,
    pub n2: usize,
    pub preset: String,
    pub support: Vec<usize>,
    pub input: StateVector,
    pub norm_defect: f64,
    pub sender_unitary: UnitaryOperator,
    pub outcomes: Vec<PureOutcomeReport>,
    pub total_probability: f64,
    pub worst_recovery_defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifySummary {
    pub schema: String,
    pub checks: usize,
    pub failed: usize,
    pub first_failure: Option<String>,
}

/// A finished command: what to print, what to persist, and the exit code.
struct Rendered {
    human: String,
    json: String,
    code: u8,
}

/// 12 significant digits, exponent form for small magnitudes.
pub fn sig12(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let e = format!("{x:.11e}");
    let rounded: f64 = e.parse().expect("formatted float parses");
    if rounded.abs() >= 1e-4 && rounded.abs() < 1e12 {
        return format!("{rounded}");
    }
    let (mantissa, exp) = e.split_once('e').expect("exponent form");
    let mantissa = mantissa.trim_end_matches('0').trim_end_matches('.');
    format!("{mantissa}e{exp}")
}

fn fmt_complex(z: Complex64) -> String {
    match (z.re == 0.0, z.im == 0.0) {
        (_, true) => sig12(z.re),
        (true, false) => format!("{}i", sig12(z.im)),
        _ if z.im < 0.0 => format!("{}-{}i", sig12(z.re), sig12(-z.im)),
        _ => format!("{}+{}i", sig12(z.re), sig12(z.im)),
    }
}

fn fmt_vector(v: &StateVector) -> String {
    let parts: Vec<String> = v.amplitudes().iter().map(|z| fmt_complex(clean(*z))).collect();
    format!("[{}]", parts.join(", "))
}

fn fmt_matrix(m: &ComplexMatrix) -> String {
    let mut out = String::new();
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| fmt_complex(clean(m[(r, c)]))).collect();
        out.push_str(&format!("  [{}]\n", row.join(", ")));
    }
    out
}

/// Zeroes roundoff-level parts so tables do not show `1e-17i`.
fn clean(z: Complex64) -> Complex64 {
    let f = |x: f64| if x.abs() < 1e-14 { 0.0 } else { x };
    Complex64::new(f(z.re), f(z.im))
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| QtpError::Io(e.error))?;
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn cmd_analyze(args: &AnalyzeArgs, seed: u64) -> Result<Rendered> {
    let chi = parse_resource(&args.resource)?;
    let start = Instant::now();
    let analysis = analyze_resource(&chi, &args.optimizer.config(seed))?;
    let elapsed = start.elapsed().as_secs_f64();
    let r = &analysis.optimizer_report;
    let human = format!(
        "resource          {}\n\
         n                 {}\n\
         singlet fraction  {}\n\
         fef               {}\n\
         f_standard        {}\n\
         f_optimal         {}\n\
         optimizer         restarts {}, best restart {}, iterations {}, gradient norm {}, hit max iterations {}, safeguard triggered {}\n\
         W\n{}",
        args.resource,
        analysis.n,
        sig12(analysis.singlet_fraction),
        sig12(analysis.fef),
        sig12(analysis.f_standard),
        sig12(analysis.f_optimal),
        r.restarts_used,
        r.best_restart,
        r.iterations,
        sig12(r.final_gradient_norm),
        r.hit_max_iterations,
        r.safeguard_triggered,
        fmt_matrix(analysis.optimizer_w.matrix()),
    );
    let report = AnalysisReport {
        schema: ANALYSIS_SCHEMA.into(),
        tool_version: TOOL_VERSION.into(),
        input: args.resource.clone(),
        seed,
        analysis,
        wall_time_seconds: args.timing.then_some(elapsed),
    };
    Ok(Rendered { human, json: to_json(&report)?, code: 0 })
}

fn cmd_teleport(args: &TeleportArgs, seed: u64) -> Result<Rendered> {
    let chi = parse_resource(&args.resource)?;
    let n = chi.bipartite_side()?;
    let input = parse_input(&args.state)?;
    if input.state.dim() != n {
        return Err(QtpError::DimensionMismatch(format!(
            "input has dimension {}, resource is {n}⊗{n}",
            input.state.dim()
        )));
    }
    if input.norm_defect > crate::linalg::NORM_TOL {
        eprintln!("warning: input amplitudes renormalized (norm defect {})", sig12(input.norm_defect));
    }
    let rho = input.state.density()?;
    let basis = WeylBasis::new(n)?;
    let mut fef = None;
    let (out, family) = match args.protocol.as_str() {
        "standard" => (apply_standard(&basis, &chi, &rho)?, CorrectionFamily::standard(&basis)),
        "optimal" => {
            let r = fully_entangled_fraction(&chi, &args.optimizer.config(seed))?;
            fef = Some(r.value);
            (apply_optimal(&basis, &chi, &rho, &r.maximizer)?, CorrectionFamily::optimal(&basis, &r.maximizer)?)
        }
        path => {
            let text = std::fs::read_to_string(path)?;
            let family: CorrectionFamily = serde_json::from_str(&text)?;
            (apply_general(&basis, &chi, &family, &rho)?, family)
        }
    };
    let oracle = if args.oracle {
        let reference = simulate_protocol(&basis, &chi, &family, &rho)?;
        let deviation = max_abs_diff(out.rho_out.matrix(), reference.rho_out.matrix());
        Some(OracleReport { deviation, tolerance: ORACLE_TOL, pass: deviation <= ORACLE_TOL })
    } else {
        None
    };
    let overlap = rho.overlap(&out.rho_out)?;
    let mut human = format!(
        "resource      {}\ninput         {}\nprotocol      {}\n",
        args.resource, args.state, args.protocol
    );
    if let Some(f) = fef {
        human.push_str(&format!("fef           {}\n", sig12(f)));
    }
    human.push_str(&format!(
        "overlap       {}\ntrace defect  {}\n",
        sig12(overlap),
        sig12(out.trace_defect)
    ));
    if let Some(o) = &oracle {
        human.push_str(&format!(
            "oracle        deviation {} (tolerance {}) {}\n",
            sig12(o.deviation),
            sig12(o.tolerance),
            if o.pass { "pass" } else { "FAIL" }
        ));
    }
    human.push_str(&format!("rho_out\n{}", fmt_matrix(out.rho_out.matrix())));
    let code = match &oracle {
        Some(o) if !o.pass => EXIT_ORACLE,
        _ => 0,
    };
    let report = TeleportReport {
        schema: TELEPORT_SCHEMA.into(),
        tool_version: TOOL_VERSION.into(),
        resource: args.resource.clone(),
        state: args.state.clone(),
        protocol: args.protocol.clone(),
        seed,
        rho_in: rho,
        rho_out: out.rho_out,
        overlap,
        trace_defect: out.trace_defect,
        fef,
        oracle,
    };
    Ok(Rendered { human, json: to_json(&report)?, code })
}

/// Names a correction: Pauli words for qubits, otherwise the Weyl operator
/// (or its adjoint) it equals, or `O[s,t]`.
fn correction_label(u: &UnitaryOperator, s: usize, t: usize) -> String {
    let n = u.dim();
    let m = u.matrix();
    let close = |a: &ComplexMatrix| max_abs_diff(m, a) < 1e-12;
    if n == 2 {
        let c = |re: f64| Complex64::new(re, 0.0);
        let named = [
            ("I", [c(1.), c(0.), c(0.), c(1.)]),
            ("X", [c(0.), c(1.), c(1.), c(0.)]),
            ("Z", [c(1.), c(0.), c(0.), c(-1.)]),
            ("iY", [c(0.), c(1.), c(-1.), c(0.)]),
        ];
        for (name, entries) in named {
            let a = ComplexMatrix::from_row_slice(2, 2, &entries);
            if close(&a) {
                return name.into();
            }
            if close(&(-a)) {
                return format!("-{name}");
            }
        }
    }
    if let Ok(basis) = WeylBasis::new(n) {
        for (a, b) in basis.labels() {
            let w = basis.op(a, b).expect("label in range").matrix();
            if close(w) {
                return format!("U({a},{b})");
            }
            if close(&w.adjoint()) {
                return format!("U({a},{b})†");
            }
        }
    }
    format!("O[{s},{t}]")
}

fn cmd_pure(args: &PureArgs) -> Result<Rendered> {
    let n1 = args.n;
    let resource = match &args.support {
        Some(support) => partial_support_resource(n1, support)?,
        None => diagonal_resource(n1)?,
    };
    let n2 = resource.n2();
    let phases = PhaseTable::preset(&args.preset, n1, n2)?;
    let input = parse_input(&args.state)?;
    let psi = match input.state {
        InputState::Pure(s) => s,
        InputState::Mixed(_) => {
            return Err(QtpError::InvalidParameter("pure protocol needs a pure input state".into()));
        }
    };
    if input.norm_defect > crate::linalg::NORM_TOL {
        eprintln!("warning: input amplitudes renormalized (norm defect {})", sig12(input.norm_defect));
    }
    if psi.dim() != n1 {
        return Err(QtpError::DimensionMismatch(format!("input has dimension {}, --n is {n1}", psi.dim())));
    }
    let protocol = PureProtocol::build(resource, phases)?;
    let result = protocol.teleport(&psi)?;
    let outcomes: Vec<PureOutcomeReport> = result
        .outcomes
        .iter()
        .map(|o| PureOutcomeReport {
            s: o.s,
            t: o.t,
            probability: o.probability,
            uncorrected: o.uncorrected.clone(),
            correction_label: correction_label(&o.correction, o.s, o.t),
            correction: o.correction.clone(),
            corrected: o.corrected.clone(),
            recovery_fidelity: o.recovery_fidelity.is_finite().then_some(o.recovery_fidelity),
        })
        .collect();

    let mut human = format!(
        "N1 = {n1}, N2 = {n2}, preset {}, support {:?}\ninput {}\n\n",
        args.preset,
        protocol.support(),
        fmt_vector(&psi)
    );
    human.push_str("s  t  probability     correction  recovery      uncorrected -> corrected\n");
    for o in &outcomes {
        let state = |v: &Option<StateVector>| v.as_ref().map(fmt_vector).unwrap_or_else(|| "-".into());
        human.push_str(&format!(
            "{:<2} {:<2} {:<15} {:<11} {:<13} {} -> {}\n",
            o.s,
            o.t,
            sig12(o.probability),
            o.correction_label,
            o.recovery_fidelity.map(sig12).unwrap_or_else(|| "-".into()),
            state(&o.uncorrected),
            state(&o.corrected),
        ));
    }
    let report = PureReport {
        schema: PURE_SCHEMA.into(),
        tool_version: TOOL_VERSION.into(),
        n1,
        n2,
        preset: args.preset.clone(),
        support: protocol.support().to_vec(),
        input: psi,
        norm_defect: input.norm_defect,
        sender_unitary: protocol.unitary().clone(),
        total_probability: result.total_probability(),
        worst_recovery_defect: result.worst_recovery_defect(),
        outcomes,
    };
    Ok(Rendered { human, json: to_json(&report)?, code: 0 })
}

fn check_id(c: &CheckResult) -> String {
    format!("{}@n={}", c.check, c.n)
}

fn cmd_verify(args: &VerifyArgs, seed: u64) -> Result<Rendered> {
    let cfg = VerifyConfig {
        n_min: args.n_min,
        n_max: args.n_max,
        seed,
        samples: args.samples,
        restarts: args.restarts,
        flip_omega: args.flip_omega,
    };
    let report = run_verify(&cfg)?;
    let mut lines = String::new();
    for c in &report.checks {
        lines.push_str(&serde_json::to_string(c)?);
        lines.push('\n');
    }
    let summary = VerifySummary {
        schema: VERIFY_SCHEMA.into(),
        checks: report.checks.len(),
        failed: report.checks.iter().filter(|c| !c.pass).count(),
        first_failure: report.first_failure().map(check_id),
    };
    lines.push_str(&serde_json::to_string(&summary)?);
    lines.push('\n');
    let code = if report.passed() { 0 } else { EXIT_VERIFY_FAILED };
    if let Some(f) = report.first_failure() {
        eprintln!(
            "verify failed: {} (deviation {}, tolerance {})",
            check_id(f),
            sig12(f.deviation),
            sig12(f.tolerance)
        );
    }
    Ok(Rendered { human: lines.clone(), json: lines, code })
}

/// Runs one command and returns the exit code. Output goes to stdout,
/// diagnostics to stderr.
pub fn run(cli: &Cli) -> u8 {
    let rendered = match &cli.command {
        Command::Analyze(a) => cmd_analyze(a, cli.seed),
        Command::Teleport(a) => cmd_teleport(a, cli.seed),
        Command::Pure(a) => cmd_pure(a),
        Command::Verify(a) => cmd_verify(a, cli.seed),
    };
    let rendered = match rendered {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    if let Some(path) = &cli.out {
        if let Err(e) = write_atomic(path, &rendered.json) {
            eprintln!("error: writing {}: {e}", path.display());
            return exit_code(&e);
        }
    }
    let text = if cli.json { &rendered.json } else { &rendered.human };
    let mut stdout = std::io::stdout().lock();
    // a closed pipe is not an error worth reporting
    let _ = stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush());
    rendered.code
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                EXIT_PARSE
            } else {
                0
            }
        }
    }
}
