//! Command-line front end: parse instance files, dispatch commands, render reports.
//!
//! Every flag has an environment override with the `GDSMAP_` prefix
//! (`GDSMAP_SEED`, `GDSMAP_TOL`, ...). Exit status is 0 on success, 1 for
//! bad-set, none-indicator and failed-verification outcomes, 2 for invalid input.

use std::io::Read;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use gdsmap::gds::{CenterConfig, GdsError, PivotBranch, ProblemInstance};
use gdsmap::instability::{certify_witness, find_unstable_perturbation, psi_map, CertificationReport, DestabilizeReport, InstabilityError};
use gdsmap::par::Execution;
use gdsmap::polymap::PolyError;
use gdsmap::reduction::{branch_for, BadSetCertificate, NormalFormKind, ReductionConfig, ReductionError, ReductionResult};
use gdsmap::sampling::{badset_sweep, BadSetSweep};
use gdsmap::verify::{check_reduction, ReductionCheckReport, SampleSpec};
use gdsmap::{classify, Classification};
use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

pub const EXIT_OK: u8 = 0;
pub const EXIT_NEGATIVE: u8 = 1;
pub const EXIT_INVALID: u8 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Whitney umbrella, inclusion or bad set, with the determinant certificate.
    Classify,
    /// Full reduction: chains, trace and residual.
    Reduce,
    /// Re-check a stored `reduce` report.
    Verify,
    /// Search for an unstable perturbation of A at p (or at p = Psi(q, c)).
    Destabilize,
    /// Certificate verdicts over random centers for the given A.
    SampleBadset,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Text,
}

#[derive(Debug, Parser)]
#[command(name = "gdsmap", version, about = "Generalized distance-squared mappings")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Instance or report file; `-` reads standard input.
    #[arg(long, global = true, env = "GDSMAP_INPUT", conflicts_with = "instance")]
    pub input: Option<PathBuf>,
    /// Inline instance JSON.
    #[arg(long, global = true, env = "GDSMAP_INSTANCE")]
    pub instance: Option<String>,
    #[arg(long, global = true, env = "GDSMAP_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Relative tolerance for the normal form and every claim.
    #[arg(long, global = true, env = "GDSMAP_TOL")]
    pub tol: Option<f64>,
    /// Relative singular-value threshold for rank decisions.
    #[arg(long, global = true, env = "GDSMAP_RANK_TOL")]
    pub rank_tol: Option<f64>,
    /// Relative threshold below which a certificate determinant counts as zero.
    #[arg(long, global = true, env = "GDSMAP_DET_TOL")]
    pub det_tol: Option<f64>,
    #[arg(long, global = true, env = "GDSMAP_SAMPLES", default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, global = true, env = "GDSMAP_FORMAT", value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Path(PathBuf),
    Stdin,
    Inline(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub source: Source,
    pub seed: u64,
    pub reduction: ReductionConfig,
    pub samples: usize,
    pub format: Format,
    pub exec: Execution,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("no input: pass --input PATH, --input - or --instance JSON")]
    MissingInput,
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid instance: {0}")]
    Instance(#[from] GdsError),
    #[error("invalid instance: {0}")]
    Schema(serde_json::Error),
    #[error("invalid option: {0}")]
    Option(String),
    #[error("inconsistent report: {0}")]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Reduction(#[from] ReductionError),
    #[error(transparent)]
    Instability(#[from] InstabilityError),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::MissingInput => "missing_input",
            CliError::Io { .. } => "io",
            CliError::Json(_) => "malformed_json",
            CliError::Instance(_) | CliError::Schema(_) => "invalid_instance",
            CliError::Option(_) => "invalid_option",
            CliError::Poly(_) => "inconsistent_report",
            CliError::Reduction(ReductionError::RankMismatch(_)) => "rank_mismatch",
            CliError::Reduction(ReductionError::WrongBranch(_)) => "wrong_branch",
            CliError::Reduction(ReductionError::Gds(_)) => "invalid_instance",
            CliError::Reduction(_) => "reduction_failed",
            CliError::Instability(InstabilityError::SingularA1) => "singular_a1",
            CliError::Instability(InstabilityError::ZeroEntry { .. }) => "zero_entry",
            CliError::Instability(InstabilityError::Dimension(_)) => "dimension",
            CliError::Instability(InstabilityError::Gds(_)) => "invalid_instance",
            CliError::Instability(_) => "instability_failed",
        }
    }

    /// Numerical failures on valid input are negative outcomes, not input errors.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Reduction(
                ReductionError::SelfCheck { .. }
                | ReductionError::Verification { .. }
                | ReductionError::Degenerate(_)
                | ReductionError::DegenerateKernel { .. }
                | ReductionError::BadSet(_),
            )
            | CliError::Instability(
                InstabilityError::Certification(_) | InstabilityError::Reduction(_) | InstabilityError::Poly(_),
            ) => EXIT_NEGATIVE,
            _ => EXIT_INVALID,
        }
    }
}

impl RunConfig {
    pub fn from_cli(cli: Cli) -> Result<Self, CliError> {
        let source = match (cli.input, cli.instance) {
            (Some(p), _) if p.as_os_str() == "-" => Source::Stdin,
            (Some(p), _) => Source::Path(p),
            (None, Some(s)) => Source::Inline(s),
            (None, None) => return Err(CliError::MissingInput),
        };
        let mut reduction = ReductionConfig::default();
        for (name, value, slot) in [
            ("--tol", cli.tol, &mut reduction.tolerance),
            ("--rank-tol", cli.rank_tol, &mut reduction.eps_rank),
            ("--det-tol", cli.det_tol, &mut reduction.eps_det),
        ] {
            if let Some(v) = value {
                if !(v.is_finite() && v > 0.0) {
                    return Err(CliError::Option(format!("{name} must be positive, got {v}")));
                }
                *slot = v;
            }
        }
        if cli.samples == 0 {
            return Err(CliError::Option("--samples must be at least 1".into()));
        }
        Ok(RunConfig {
            command: cli.command,
            source,
            seed: cli.seed,
            reduction,
            samples: cli.samples,
            format: cli.format,
            exec: Execution::Parallel,
        })
    }

    fn spec(&self, half_width: f64) -> SampleSpec {
        SampleSpec::new(half_width, self.samples, self.seed)
    }

    fn read(&self) -> Result<String, CliError> {
        match &self.source {
            Source::Inline(s) => Ok(s.clone()),
            Source::Path(p) => std::fs::read_to_string(p).map_err(|e| CliError::Io { path: p.display().to_string(), source: e }),
            Source::Stdin => {
                let mut s = String::new();
                std::io::stdin()
                    .read_to_string(&mut s)
                    .map_err(|e| CliError::Io { path: "<stdin>".into(), source: e })?;
                Ok(s)
            }
        }
    }
}

/// Fields shared by every report.
#[derive(Debug, Clone, Serialize)]
pub struct Header {
    pub command: Command,
    pub seed: u64,
    pub samples: usize,
    pub config: ReductionConfig,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassifyReport {
    #[serde(flatten)]
    pub header: Header,
    pub kind: &'static str,
    pub certificate: BadSetCertificate,
    pub residual: Option<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReduceOutput {
    pub result: ReductionResult,
    pub check: ReductionCheckReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReduceReport {
    #[serde(flatten)]
    pub header: Header,
    pub kind: &'static str,
    #[serde(flatten)]
    pub output: Option<ReduceOutput>,
    /// Only on bad-set outcomes.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<BadSetCertificate>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    #[serde(flatten)]
    pub header: Header,
    pub kind: NormalFormKind,
    pub stored_residual: f64,
    pub recomputed_residual: f64,
    pub check: ReductionCheckReport,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DestabilizeOutput {
    #[serde(flatten)]
    pub header: Header,
    /// Centers the search ran at; equal to `Psi(q, c)` when built from `q` and `c`.
    pub p: CenterConfig,
    pub from_psi: bool,
    pub report: DestabilizeReport,
    pub certification: Option<CertificationReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    #[serde(flatten)]
    pub header: Header,
    pub sweep: BadSetSweep,
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorReport {
    #[serde(flatten)]
    pub header: Header,
    pub error: ErrorBody,
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorBody {
    pub kind: &'static str,
    pub message: String,
    pub exit_code: u8,
}

/// Exit status and rendered report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOutput {
    pub exit_code: u8,
    pub report: String,
}

pub fn run(config: &RunConfig) -> RunOutput {
    let header = Header { command: config.command, seed: config.seed, samples: config.samples, config: config.reduction };
    let outcome = match config.command {
        Command::Classify => run_classify(config, &header),
        Command::Reduce => run_reduce(config, &header),
        Command::Verify => run_verify(config, &header),
        Command::Destabilize => run_destabilize(config, &header),
        Command::SampleBadset => run_sweep(config, &header),
    };
    let (exit_code, value) = outcome.unwrap_or_else(|e| {
        let exit_code = e.exit_code();
        let body = ErrorBody { kind: e.kind(), message: e.to_string(), exit_code };
        (exit_code, to_value(&ErrorReport { header: header.clone(), error: body }))
    });
    RunOutput { exit_code, report: render(&value, config.format) }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

fn parse_instance(text: &str) -> Result<ProblemInstance, CliError> {
    let value: Value = serde_json::from_str(text)?;
    instance_from_value(value)
}

fn instance_from_value(value: Value) -> Result<ProblemInstance, CliError> {
    serde_json::from_value(value).map_err(CliError::Schema)
}

fn run_classify(config: &RunConfig, header: &Header) -> Result<(u8, Value), CliError> {
    let inst = parse_instance(&config.read()?)?;
    let c = classify(&inst.p, &inst.matrix, &config.reduction)?;
    let (residual, warnings) = match c.result() {
        Some(r) => (Some(r.residual), r.warnings.clone()),
        None => (None, c.certificate().warnings.clone()),
    };
    let code = if matches!(c, Classification::BadSet(_)) { EXIT_NEGATIVE } else { EXIT_OK };
    let report = ClassifyReport { header: header.clone(), kind: c.label(), certificate: c.certificate().clone(), residual, warnings };
    Ok((code, to_value(&report)))
}

fn run_reduce(config: &RunConfig, header: &Header) -> Result<(u8, Value), CliError> {
    let inst = parse_instance(&config.read()?)?;
    let c = classify(&inst.p, &inst.matrix, &config.reduction)?;
    let kind = c.label();
    let (code, output, certificate) = match c {
        Classification::BadSet(cert) => (EXIT_NEGATIVE, None, Some(*cert)),
        Classification::WhitneyUmbrella(r) | Classification::Inclusion(r) => {
            let check = check_reduction(&r, &config.spec(2.0), config.exec)?;
            let code = if check.passed { EXIT_OK } else { EXIT_NEGATIVE };
            (code, Some(ReduceOutput { result: *r, check }), None)
        }
    };
    Ok((code, to_value(&ReduceReport { header: header.clone(), kind, output, certificate })))
}

fn run_verify(config: &RunConfig, header: &Header) -> Result<(u8, Value), CliError> {
    let value: Value = serde_json::from_str(&config.read()?)?;
    // a `reduce` report, or a bare result
    let result_value = match value.get("result") {
        Some(r) => r.clone(),
        None => value,
    };
    let mut result: ReductionResult = serde_json::from_value(result_value)?;
    let stored_residual = result.residual;
    result.tolerance = config.reduction.tolerance;
    let g = result.instance.map();
    let composed = result.composed()?;
    let recomputed_residual = composed.max_coefficient_difference(&result.normal_form())? / (1.0 + g.max_abs_coefficient());
    let check = check_reduction(&result, &config.spec(2.0), config.exec)?;
    let passed = check.passed && recomputed_residual <= config.reduction.tolerance;
    let report = VerifyReport { header: header.clone(), kind: result.kind, stored_residual, recomputed_residual, check, passed };
    Ok((if passed { EXIT_OK } else { EXIT_NEGATIVE }, to_value(&report)))
}

/// Instance fields plus either `p`, or `q` and `c` for `p = Psi(q, c)`.
fn destabilize_instance(mut value: Value) -> Result<(ProblemInstance, bool), CliError> {
    let obj = value.as_object_mut().ok_or_else(|| CliError::Option("instance must be a JSON object".into()))?;
    let (q, c) = (obj.remove("q"), obj.remove("c"));
    match (q, c) {
        (None, None) => Ok((instance_from_value(value)?, false)),
        (Some(q), Some(c)) => {
            if obj.contains_key("p") {
                return Err(CliError::Option("give either p or (q, c), not both".into()));
            }
            let q: Vec<Vec<f64>> = serde_json::from_value(q)?;
            let c: Vec<Vec<f64>> = serde_json::from_value(c)?;
            // parse A through the instance schema with placeholder centers
            let n = obj.get("n").and_then(Value::as_u64).unwrap_or(0) as usize;
            let k = obj.get("k").and_then(Value::as_u64).unwrap_or(0) as usize;
            obj.insert("p".into(), serde_json::to_value(CenterConfig::zeros(n, k).points())?);
            let placeholder = instance_from_value(value)?;
            let a = &placeholder.matrix;
            let a1: Vec<Vec<f64>> = a.rows()[..=a.n()].to_vec();
            let p = psi_map(&q, &c, &a1)?;
            Ok((ProblemInstance::new(a.clone(), p)?, true))
        }
        _ => Err(CliError::Option("q and c must be given together".into())),
    }
}

fn run_destabilize(config: &RunConfig, header: &Header) -> Result<(u8, Value), CliError> {
    let value: Value = serde_json::from_str(&config.read()?)?;
    let (inst, from_psi) = destabilize_instance(value)?;
    let spec = config.spec(2.0);
    let report = find_unstable_perturbation(&inst.p, &inst.matrix, &spec)?;
    let certification = report.witness().map(|w| certify_witness(w, &spec));
    let code = match &certification {
        Some(c) if c.passed => EXIT_OK,
        _ => EXIT_NEGATIVE,
    };
    let out = DestabilizeOutput { header: header.clone(), p: inst.p, from_psi, report, certification };
    Ok((code, to_value(&out)))
}

fn run_sweep(config: &RunConfig, header: &Header) -> Result<(u8, Value), CliError> {
    let mut value: Value = serde_json::from_str(&config.read()?)?;
    // centers are resampled, so `p` is optional here
    if let Some(obj) = value.as_object_mut() {
        if !obj.contains_key("p") {
            let n = obj.get("n").and_then(Value::as_u64).unwrap_or(0) as usize;
            let k = obj.get("k").and_then(Value::as_u64).unwrap_or(0) as usize;
            obj.insert("p".into(), serde_json::to_value(CenterConfig::zeros(n, k).points())?);
        }
    }
    let inst = instance_from_value(value)?;
    let branch: PivotBranch = branch_for(&inst.matrix, config.reduction.eps_rank)?;
    let sweep = badset_sweep(&inst.matrix, branch, &config.spec(1.0), &config.reduction, config.exec)?;
    Ok((EXIT_OK, to_value(&SweepReport { header: header.clone(), sweep })))
}

/// Text rendering: one `path: value` line per leaf, arrays of numbers inline.
pub fn render(value: &Value, format: Format) -> String {
    match format {
        Format::Json => serde_json::to_string_pretty(value).expect("reports serialize"),
        Format::Text => {
            let mut out = String::new();
            render_text(value, "", &mut out);
            out.pop();
            out
        }
    }
}

fn is_flat(v: &Value) -> bool {
    match v {
        Value::Array(items) => items.iter().all(|x| !x.is_object() && (!x.is_array() || is_flat(x))),
        _ => !v.is_object(),
    }
}

fn render_text(value: &Value, path: &str, out: &mut String) {
    let join = |key: &str| if path.is_empty() { key.to_string() } else { format!("{path}.{key}") };
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                render_text(v, &join(k), out);
            }
        }
        Value::Array(items) if !is_flat(value) => {
            for (i, v) in items.iter().enumerate() {
                render_text(v, &format!("{path}[{i}]"), out);
            }
        }
        other => {
            let s = match other {
                Value::String(s) => s.clone(),
                v => v.to_string(),
            };
            out.push_str(&format!("{path}: {s}\n"));
        }
    }
}
