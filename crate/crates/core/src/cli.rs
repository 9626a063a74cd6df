//! Command-line front end.
//!
//! Every run resolves its flags and optional `--config` file into one
//! [`RunConfig`], names its outputs by the SHA-256 of that config, embeds it in
//! the JSON report and writes all files atomically after the computation has
//! finished, so a failed run leaves nothing behind.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::certificates::{
    check_fmt_conditions, gaussian_pair_bound, split_gaussian_target, theorem35_bound, TargetSpec,
};
use crate::chaos::exact_covariance;
use crate::corpus::{expansion_corpus, scalar_corpus};
use crate::empirics::{
    d2_lower_bound, mc_stein_gap, sample_expansion, sample_gaussian, sandwich_with_rerun, Estimate,
    TestFunctionDictionary,
};
use crate::error::Error;
use crate::gallery::{degenerate_gaussian_pair, schatten_gap_grid, CounterexampleCase, LambdaSpec};
use crate::io::{self, ExpansionFile, KernelFile, Symmetry, TargetInput};
use crate::krr::{krr_clt_certificate, midpoint_design, KRRSetup, MercerBasis, MercerKernel};
use crate::mc::{McConfig, McReport, RNG_ALGORITHM};
use crate::operator::Truncation;
use crate::plot::{render_svg, Series};
use crate::she::{invariant_gap_certificate, mc_weak_error, weak_error_bound, HeatModel, QFamily};
use crate::tensor::{ChaosExpansion, Kernel};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_CONSISTENCY: i32 = 3;
pub const EXIT_SANDWICH: i32 = 4;

pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_SAMPLES: usize = 100_000;
pub const DEFAULT_SHARDS: usize = 8;
pub const DEFAULT_OUT: &str = "chaoscert-out";

/// A failure with its process exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self { code: EXIT_INPUT, message: message.into() }
    }

    pub fn consistency(message: impl Into<String>) -> Self {
        Self { code: EXIT_CONSISTENCY, message: message.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::DimensionMismatch { .. } | Error::RankViolation { .. } => EXIT_CONSISTENCY,
            _ => EXIT_INPUT,
        };
        Self { code, message: e.to_string() }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "chaoscert", version, about = "Trace-class certificates and Monte-Carlo checks for Hilbert-valued Wiener chaos")]
pub struct Cli {
    /// Base seed for every Monte-Carlo stream.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Monte-Carlo sample count.
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Number of RNG shards (one ChaCha stream per shard).
    #[arg(long, global = true)]
    pub shards: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// JSON config; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Certificate for an expansion against a Gaussian target, or between two Gaussians.
    Certify(CertifyArgs),
    /// Dictionary lower bound, MC Stein gap and certificate for one case.
    Validate(ValidateArgs),
    /// Emit the counterexample gallery with checked claims.
    Gallery(GalleryArgs),
    /// Stochastic heat equation: Galerkin weak errors and convergence to equilibrium.
    She(SheArgs),
    /// Kernel ridge regression with chaos noise.
    Krr(KrrArgs),
    /// Write the seeded random test corpus.
    Corpus(CorpusArgs),
    /// Decay plots (SVG + CSV) from report files.
    Plot(PlotArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Certify(_) => "certify",
            Command::Validate(_) => "validate",
            Command::Gallery(_) => "gallery",
            Command::She(_) => "she",
            Command::Krr(_) => "krr",
            Command::Corpus(_) => "corpus",
            Command::Plot(_) => "plot",
        }
    }

    fn params(&self) -> Value {
        let v = match self {
            Command::Certify(a) => serde_json::to_value(a),
            Command::Validate(a) => serde_json::to_value(a),
            Command::Gallery(a) => serde_json::to_value(a),
            Command::She(a) => serde_json::to_value(a),
            Command::Krr(a) => serde_json::to_value(a),
            Command::Corpus(a) => serde_json::to_value(a),
            Command::Plot(a) => serde_json::to_value(a),
        };
        v.expect("argument structs serialize")
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct CertifyArgs {
    /// Expansion (or kernel) file.
    #[arg(long)]
    pub expansion: Option<PathBuf>,
    /// Covariance operator file; certifies the Gaussian pair instead of an expansion.
    #[arg(long, conflicts_with = "expansion")]
    pub covariance: Option<PathBuf>,
    /// Target operator file, or a per-order target file.
    #[arg(long)]
    pub target: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub n_grid: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub m_grid: Option<Vec<usize>>,
    /// Reject kernels whose asymmetry exceeds 1e-9 instead of symmetrizing.
    #[arg(long)]
    pub strict: Option<bool>,
    /// Threshold for flagging fourth-moment-theorem diagnostics.
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ValidateArgs {
    #[arg(long)]
    pub expansion: Option<PathBuf>,
    /// Gaussian target covariance (operator or per-order file).
    #[arg(long)]
    pub target: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub n_grid: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub m_grid: Option<Vec<usize>>,
    /// Width of the error bars in the sandwich checks.
    #[arg(long)]
    pub sigma_factor: Option<f64>,
    #[arg(long)]
    pub strict: Option<bool>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct GalleryArgs {
    /// degenerate-pair, schatten-gap or all.
    #[arg(long)]
    pub case: Option<String>,
    /// Dimension for the degenerate Gaussian pair.
    #[arg(long)]
    pub pair_dim: Option<usize>,
    /// Schatten exponent for the decreasing gap.
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub n_grid: Option<Vec<usize>>,
    /// Number of limit coordinates; defaults to the largest n.
    #[arg(long)]
    pub limit_dim: Option<usize>,
    /// Geometric ratio of the limit eigenvalues.
    #[arg(long)]
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct SheArgs {
    /// power or geometric.
    #[arg(long)]
    pub q_family: Option<String>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    /// Number of simulated modes.
    #[arg(long = "K")]
    #[serde(rename = "K")]
    pub big_k: Option<usize>,
    /// Galerkin truncation levels.
    #[arg(long = "n", value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    /// Final times for the weak-error study.
    #[arg(long = "T", value_delimiter = ',')]
    #[serde(rename = "T")]
    pub big_t: Option<Vec<f64>>,
    /// Times for the convergence-to-equilibrium study.
    #[arg(long, value_delimiter = ',')]
    pub t_grid: Option<Vec<f64>>,
    /// Initial condition expansion; zero when omitted.
    #[arg(long)]
    pub initial: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub m_grid: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct KrrArgs {
    /// CSV with one design point per line; overrides --n-grid.
    #[arg(long)]
    pub design_file: Option<PathBuf>,
    /// JSON {"mu": [...], "phi": "fourier" | "poly"}.
    #[arg(long)]
    pub mercer_spec: Option<PathBuf>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub sigma2: Option<f64>,
    /// Chaos order of the noise.
    #[arg(long)]
    pub p: Option<usize>,
    /// Sample sizes for midpoint designs.
    #[arg(long, value_delimiter = ',')]
    pub n_grid: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub m_grid: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct CorpusArgs {
    /// Number of expansion cases.
    #[arg(long)]
    pub count: Option<usize>,
    /// Number of scalar kernels.
    #[arg(long)]
    pub scalar_count: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct PlotArgs {
    /// Report files containing a "series" array.
    #[arg(long, num_args = 0.., value_delimiter = ',')]
    pub reports: Option<Vec<PathBuf>>,
}

/// Fully resolved run configuration, embedded in every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub seed: u64,
    pub samples: usize,
    pub shards: usize,
    pub params: Value,
    pub rng: String,
    pub version: String,
    #[serde(skip)]
    pub out: PathBuf,
}

impl RunConfig {
    /// First 16 hex digits of the SHA-256 of the serialized config.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes).iter().take(8).fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    pub fn stem(&self) -> String {
        format!("{}-{}", self.command, self.hash())
    }

    fn mc(&self) -> CliResult<McConfig> {
        Ok(McConfig::new(self.samples, self.seed, self.shards)?)
    }

    fn params<T: for<'de> Deserialize<'de>>(&self) -> CliResult<T> {
        serde_json::from_value(self.params.clone()).map_err(|e| CliError::input(format!("config: {e}")))
    }
}

fn overlay(base: &mut Value, top: &Value) {
    if let (Value::Object(b), Value::Object(t)) = (&mut *base, top) {
        for (k, v) in t {
            if !v.is_null() {
                b.insert(k.clone(), v.clone());
            }
        }
    } else if !top.is_null() {
        *base = top.clone();
    }
}

/// Merges the config file (if any) under the command-line flags.
pub fn resolve(cli: &Cli) -> CliResult<RunConfig> {
    let file: Value = match &cli.config {
        Some(p) => io::read_json(p).map_err(|e| CliError::input(format!("{}: {e}", p.display())))?,
        None => json!({}),
    };
    if !file.is_object() {
        return Err(CliError::input("config file must hold a JSON object"));
    }
    let name = cli.command.name();
    let mut params = file.get(name).cloned().unwrap_or_else(|| json!({}));
    overlay(&mut params, &cli.command.params());
    if let Value::Object(m) = &mut params {
        m.retain(|_, v| !v.is_null());
    }
    let from_file = |key: &str| file.get(key).cloned();
    let pick_u64 = |flag: Option<u64>, key: &str, default: u64| -> CliResult<u64> {
        match (flag, from_file(key)) {
            (Some(v), _) => Ok(v),
            (None, Some(v)) => v.as_u64().ok_or_else(|| CliError::input(format!("config {key} must be a nonnegative integer"))),
            (None, None) => Ok(default),
        }
    };
    let out = match (&cli.out, from_file("out")) {
        (Some(p), _) => p.clone(),
        (None, Some(Value::String(s))) => PathBuf::from(s),
        (None, Some(_)) => return Err(CliError::input("config out must be a string")),
        (None, None) => PathBuf::from(DEFAULT_OUT),
    };
    Ok(RunConfig {
        command: name.to_string(),
        seed: pick_u64(cli.seed, "seed", DEFAULT_SEED)?,
        samples: pick_u64(cli.samples.map(|v| v as u64), "samples", DEFAULT_SAMPLES as u64)? as usize,
        shards: pick_u64(cli.shards.map(|v| v as u64), "shards", DEFAULT_SHARDS as u64)? as usize,
        params,
        rng: RNG_ALGORITHM.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        out,
    })
}

/// Files produced by a run, relative to the output directory.
#[derive(Debug, Default)]
pub struct Outcome {
    pub result: Value,
    pub files: Vec<(String, Vec<u8>)>,
    pub warnings: Vec<String>,
    /// Exit status to report after the files are written.
    pub failure: Option<CliError>,
}

impl Outcome {
    fn new(result: Value) -> Self {
        Self { result, ..Self::default() }
    }

    fn file(&mut self, name: impl Into<String>, bytes: impl Into<Vec<u8>>) {
        self.files.push((name.into(), bytes.into()));
    }

    fn json_file<T: Serialize>(&mut self, name: impl Into<String>, value: &T) {
        let mut text = serde_json::to_string_pretty(value).expect("serializable");
        text.push('\n');
        self.file(name, text);
    }
}

fn required<'a>(p: &'a Option<PathBuf>, flag: &str) -> CliResult<&'a Path> {
    p.as_deref().ok_or_else(|| CliError::input(format!("missing --{flag}")))
}

fn symmetry(strict: Option<bool>) -> Symmetry {
    if strict.unwrap_or(false) {
        Symmetry::Strict
    } else {
        Symmetry::Symmetrize
    }
}

fn load_expansion(p: &Path, strict: Option<bool>) -> CliResult<ChaosExpansion> {
    io::read_expansion(p, symmetry(strict)).map_err(|e| with_path(e, p))
}

fn with_path(e: Error, p: &Path) -> CliError {
    let mut c = CliError::from(e);
    c.message = format!("{}: {}", p.display(), c.message);
    c
}

fn targets_for(f: &ChaosExpansion, input: TargetInput) -> CliResult<TargetSpec> {
    Ok(match input {
        TargetInput::Aggregate(t) => split_gaussian_target(f, &t)?,
        TargetInput::PerOrder(s) => {
            let m = f.truncation().big_hdim;
            if s.dim() != m {
                return Err(CliError::consistency(format!("target dim {} does not match Hdim {m}", s.dim())));
            }
            s
        }
    })
}

fn default_n_grid(f: &ChaosExpansion) -> Vec<usize> {
    (1..=f.max_order().max(1)).collect()
}

fn default_m_grid(f: &ChaosExpansion) -> Vec<usize> {
    (1..=f.truncation().big_hdim).collect()
}

fn run_certify(cfg: &RunConfig) -> CliResult<Outcome> {
    let a: CertifyArgs = cfg.params()?;
    let target_path = required(&a.target, "target")?;
    let target = io::read_target(target_path).map_err(|e| with_path(e, target_path))?;
    if let Some(cov) = &a.covariance {
        let t1 = io::read_operator(cov).map_err(|e| with_path(e, cov))?;
        let t2 = match target {
            TargetInput::Aggregate(t) => t,
            TargetInput::PerOrder(s) => s.aggregate(),
        };
        let pair = gaussian_pair_bound(&t1, &t2)?;
        let mut out = Outcome::new(json!({ "bound": pair.value, "pair": pair }));
        if let Some(w) = &pair.warning {
            out.warnings.push(w.clone());
        }
        return Ok(out);
    }
    let f = load_expansion(required(&a.expansion, "expansion")?, a.strict)?;
    let targets = targets_for(&f, target)?;
    let n_grid = a.n_grid.clone().unwrap_or_else(|| default_n_grid(&f));
    let m_grid = a.m_grid.clone().unwrap_or_else(|| default_m_grid(&f));
    let mut report = theorem35_bound(&f, &targets, &n_grid, &m_grid)?;
    if let Some(tol) = a.tol {
        report.diagnostics = check_fmt_conditions(&f, &targets, tol)?;
    }
    let mut out = Outcome::new(serde_json::to_value(&report).map_err(Error::from)?);
    out.warnings.extend(report.diagnostics.warnings.iter().cloned());
    out.file(format!("{}.csv", cfg.stem()), report.to_csv());
    Ok(out)
}

fn run_validate(cfg: &RunConfig) -> CliResult<Outcome> {
    let a: ValidateArgs = cfg.params()?;
    let mc = cfg.mc()?;
    let f = load_expansion(required(&a.expansion, "expansion")?, a.strict)?;
    let target_path = required(&a.target, "target")?;
    let target = io::read_target(target_path).map_err(|e| with_path(e, target_path))?;
    let t_z = match &target {
        TargetInput::Aggregate(t) => t.clone(),
        TargetInput::PerOrder(s) => s.aggregate(),
    };
    let m = f.truncation().big_hdim;
    if t_z.dim() != m {
        return Err(CliError::consistency(format!("target dim {} does not match Hdim {m}", t_z.dim())));
    }
    t_z.require_psd(crate::certificates::TARGET_PSD_TOL)?;
    let targets = targets_for(&f, target)?;
    let k_sigma = a.sigma_factor.unwrap_or(3.0);
    if !(k_sigma.is_finite() && k_sigma >= 0.0) {
        return Err(CliError::input(format!("sigma-factor must be a finite nonnegative number, got {k_sigma}")));
    }
    let n_grid = a.n_grid.clone().unwrap_or_else(|| default_n_grid(&f));
    let m_grid = a.m_grid.clone().unwrap_or_else(|| default_m_grid(&f));
    let cert = theorem35_bound(&f, &targets, &n_grid, &m_grid)?;
    let dict = TestFunctionDictionary::default_for(m, cfg.seed)?;

    let lower = |c: &McConfig| -> crate::Result<(Estimate, McReport)> {
        let sf = sample_expansion(&f, c)?;
        let sz = sample_gaussian(&t_z, &McConfig { seed: c.seed.wrapping_add(1), ..*c })?;
        let lb = d2_lower_bound(&sf, &sz, &dict)?;
        Ok((Estimate { value: lb.value, stderr: lb.stderr }, lb.to_report("d2_lower_bound", c)))
    };
    let stein = sandwich_with_rerun(&mc, k_sigma, |c| {
        let (lo, _) = lower(c)?;
        let s = mc_stein_gap(&f, &t_z, c)?;
        Ok((lo, Estimate { value: s.value, stderr: s.stderr }))
    })?;
    let certified = sandwich_with_rerun(&mc, k_sigma, |c| {
        let (lo, _) = lower(c)?;
        Ok((lo, Estimate { value: cert.bound, stderr: 0.0 }))
    })?;
    let (_, d2_report) = lower(&mc)?;
    let stein_report = mc_stein_gap(&f, &t_z, &mc)?;
    let mismatch = 0.5 * exact_covariance(&f).sub(&t_z)?.trace_norm();
    let pass = stein.holds && certified.holds;
    let mut out = Outcome::new(json!({
        "d2_lower": d2_report,
        "stein_mc": stein_report,
        "certificate": cert,
        "sandwich": { "lower_vs_stein": stein, "lower_vs_certificate": certified },
        "covariance_mismatch": mismatch,
        "covariance_mismatch_flagged": mismatch > 1e-9,
        "pass": pass,
    }));
    if mismatch > 1e-9 {
        out.warnings.push(format!("target differs from the exact covariance: (1/2)|T_F - T_Z|_S1 = {mismatch:e}"));
    }
    if !pass {
        out.failure = Some(CliError { code: EXIT_SANDWICH, message: "sandwich inequality violated".into() });
    }
    Ok(out)
}

fn emit_case(out: &mut Outcome, dir: &str, case: &CounterexampleCase) -> Value {
    let mut files = Vec::new();
    for (name, f) in &case.expansions {
        let path = format!("{dir}/{}/{name}.json", case.name);
        out.json_file(&path, &ExpansionFile::from_expansion(f));
        files.push(path);
    }
    for (name, t) in &case.operators {
        let path = format!("{dir}/{}/{name}.op.json", case.name);
        out.json_file(&path, t);
        files.push(path);
    }
    let claims_path = format!("{dir}/{}/claims.json", case.name);
    out.json_file(&claims_path, &json!({ "name": case.name, "parameters": case.parameters, "claims": case.claims }));
    files.push(claims_path);
    json!({ "name": case.name, "parameters": case.parameters, "all_pass": case.all_pass(), "files": files })
}

fn run_gallery(cfg: &RunConfig) -> CliResult<Outcome> {
    let a: GalleryArgs = cfg.params()?;
    let which = a.case.clone().unwrap_or_else(|| "all".into());
    if !["all", "degenerate-pair", "schatten-gap"].contains(&which.as_str()) {
        return Err(CliError::input(format!("unknown gallery case {which:?}")));
    }
    let dir = cfg.stem();
    let mut out = Outcome::new(Value::Null);
    let mut cases = Vec::new();
    let mut failed = Vec::new();
    if which == "all" || which == "degenerate-pair" {
        let c = degenerate_gaussian_pair(a.pair_dim.unwrap_or(2))?;
        failed.extend(c.failed().iter().map(|f| format!("{}: {}", c.name, f.description)));
        cases.push(emit_case(&mut out, &dir, &c));
    }
    if which == "all" || which == "schatten-gap" {
        let ns = a.n_grid.clone().unwrap_or_else(|| vec![10, 100, 1000]);
        let lambda = LambdaSpec::Geometric { ratio: a.ratio.unwrap_or(0.5) };
        let (seq, claims) = schatten_gap_grid(a.p.unwrap_or(2.0), a.gamma.unwrap_or(0.75), &ns, a.limit_dim.unwrap_or_else(|| ns.iter().copied().max().unwrap_or(1)), &lambda)?;
        for c in &seq {
            failed.extend(c.failed().iter().map(|f| format!("{}: {}", c.name, f.description)));
            cases.push(emit_case(&mut out, &dir, c));
        }
        failed.extend(claims.iter().filter(|c| !c.passed).map(|c| format!("schatten_gap: {}", c.description)));
        out.json_file(format!("{dir}/schatten_gap_claims.json"), &claims);
    }
    out.result = json!({ "cases": cases, "failed_claims": failed });
    if !failed.is_empty() {
        out.failure = Some(CliError::consistency(format!("{} gallery claims failed", failed.len())));
    }
    Ok(out)
}

fn q_family(a: &SheArgs) -> CliResult<QFamily> {
    match a.q_family.as_deref().unwrap_or("power") {
        "power" | "power-law" => Ok(QFamily::PowerLaw { beta: a.beta.unwrap_or(2.0) }),
        "geometric" => Ok(QFamily::Geometric { rho: a.rho.unwrap_or(0.5) }),
        other => Err(CliError::input(format!("unknown q-family {other:?}"))),
    }
}

fn run_she(cfg: &RunConfig) -> CliResult<Outcome> {
    let a: SheArgs = cfg.params()?;
    let mc = cfg.mc()?;
    let big_k = a.big_k.unwrap_or(16);
    let model = HeatModel::new(q_family(&a)?, big_k)?;
    let ns = a.n.clone().unwrap_or_else(|| vec![2, 4, 8]);
    let ts = a.big_t.clone().unwrap_or_else(|| vec![0.25, 0.5, 1.0]);
    let t_grid = a.t_grid.clone().unwrap_or_else(|| vec![0.1, 0.25, 0.5, 1.0, 2.0]);
    let dict = TestFunctionDictionary::default_for(big_k, cfg.seed)?;

    let mut csv = String::from("n,T,bound,mc_weak_error,mc_stderr,within_5_stderr\n");
    let mut rows = Vec::new();
    let mut series = Vec::new();
    for &t_final in &ts {
        let mut s = Series::new(format!("weak error bound vs n (T={t_final})"), "n", "bound").log_log();
        for &n in &ns {
            let b = weak_error_bound(&model, n, t_final)?;
            let est = mc_weak_error(&model, n, t_final, &dict, &mc)?;
            let ok = est.report.value <= b.value + 5.0 * est.report.stderr;
            let _ = writeln!(csv, "{n},{t_final},{},{},{},{ok}", b.value, est.report.value, est.report.stderr);
            rows.push(json!({ "n": n, "T": t_final, "bound": b, "mc": est.report, "within_5_stderr": ok }));
            s.push(n as f64, b.value);
        }
        series.push(s);
    }
    for &n in &ns {
        let mut s = Series::new(format!("weak error bound vs T (n={n})"), "T", "bound");
        for &t_final in &ts {
            s.push(t_final, weak_error_bound(&model, n, t_final)?.value);
        }
        series.push(s);
    }

    let f0 = match &a.initial {
        Some(p) => load_expansion(p, None)?,
        None => ChaosExpansion::new(Truncation::new(1, 1)?),
    };
    let n_cert: Vec<usize> = (1..=f0.max_order().max(1)).collect();
    let m_grid = a.m_grid.clone().unwrap_or_else(|| vec![big_k]);
    let mut gap_csv = String::from("t,bound,N,m\n");
    let mut gaps = Vec::new();
    let mut s = Series::new("equilibrium gap certificate vs t", "t", "bound");
    s.log_y = true;
    for &t in &t_grid {
        let r = invariant_gap_certificate(&f0, &model, t, &n_cert, &m_grid)?;
        let _ = writeln!(gap_csv, "{t},{},{},{}", r.bound, r.n, r.m);
        s.push(t, r.bound);
        gaps.push(json!({ "t": t, "report": r }));
    }
    series.push(s);

    let violations = rows.iter().filter(|r| r["within_5_stderr"] == json!(false)).count();
    let mut out = Outcome::new(json!({
        "model": model,
        "weak_error": rows,
        "equilibrium_gap": gaps,
        "series": series,
        "violations": violations,
    }));
    out.file(format!("{}-weak.csv", cfg.stem()), csv);
    out.file(format!("{}-gap.csv", cfg.stem()), gap_csv);
    if violations > 0 {
        out.failure = Some(CliError { code: EXIT_SANDWICH, message: format!("{violations} MC weak errors exceed the bound") });
    }
    Ok(out)
}

#[derive(Debug, Deserialize)]
struct MercerSpecFile {
    mu: Vec<f64>,
    phi: MercerBasis,
}

fn run_krr(cfg: &RunConfig) -> CliResult<Outcome> {
    let a: KrrArgs = cfg.params()?;
    let kernel = match &a.mercer_spec {
        Some(p) => {
            let spec: MercerSpecFile = io::read_json(p).map_err(|e| with_path(e, p))?;
            MercerKernel::new(spec.mu, spec.phi)?
        }
        None => MercerKernel::new(vec![1.0, 0.5, 0.5, 0.25, 0.25], MercerBasis::Fourier)?,
    };
    let designs: Vec<Vec<f64>> = match &a.design_file {
        Some(p) => vec![io::read_column_csv(p).map_err(|e| with_path(e, p))?],
        None => a.n_grid.clone().unwrap_or_else(|| vec![10, 100, 1000]).into_iter().map(midpoint_design).collect(),
    };
    let gamma = kernel.population_covariance();
    let m_grid = a.m_grid.clone().unwrap_or_else(|| vec![kernel.rank()]);
    let mut csv = String::from("n,bound,covariance_component,contraction_component,cov_gap_direct,cov_gap_bound,contraction_sq_max,contraction_sq_bound\n");
    let mut runs = Vec::new();
    let mut s_bound = Series::new("certificate vs n", "n", "bound").log_log();
    let mut s_contr = Series::new("contraction component vs n", "n", "R3").log_log();
    for design in designs {
        let setup = KRRSetup::new(design, kernel.clone(), a.lambda.unwrap_or(0.1), a.p.unwrap_or(2), a.sigma2.unwrap_or(1.0))?;
        let c = krr_clt_certificate(&setup, &gamma, &m_grid)?;
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            c.n,
            c.report.bound,
            c.covariance_component,
            c.contraction_component,
            c.cov_gap.direct,
            c.cov_gap.sigma2 * c.cov_gap.bound,
            c.contraction.contraction_sq_max,
            c.contraction.contraction_sq_bound
        );
        s_bound.push(c.n as f64, c.report.bound);
        s_contr.push(c.n as f64, c.contraction_component);
        runs.push(c);
    }
    let mut out = Outcome::new(json!({ "kernel": kernel, "runs": runs, "series": [s_bound, s_contr] }));
    out.file(format!("{}.csv", cfg.stem()), csv);
    Ok(out)
}

fn run_corpus(cfg: &RunConfig) -> CliResult<Outcome> {
    let a: CorpusArgs = cfg.params()?;
    let dir = cfg.stem();
    let mut out = Outcome::new(Value::Null);
    let mut manifest = Vec::new();
    for case in expansion_corpus(cfg.seed, a.count.unwrap_or(60))? {
        out.json_file(format!("{dir}/{}.json", case.name), &ExpansionFile::from_expansion(&case.expansion));
        out.json_file(format!("{dir}/{}.target.json", case.name), &case.target);
        manifest.push(case.manifest());
    }
    let scalars = scalar_corpus(cfg.seed, a.scalar_count.unwrap_or(50))?;
    for (k, g) in scalars.iter().enumerate() {
        let k_file = Kernel::new(g.order(), Truncation::new(g.hdim(), 1)?, vec![g.clone()])?;
        out.json_file(format!("{dir}/scalar_{k}.json"), &KernelFile::from_kernel(&k_file));
    }
    out.result = json!({ "directory": dir, "cases": manifest, "scalar_kernels": scalars.len() });
    Ok(out)
}

fn file_stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "report".into())
}

fn slug(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' }).collect()
}

fn run_plot(cfg: &RunConfig) -> CliResult<Outcome> {
    let a: PlotArgs = cfg.params()?;
    let reports = a.reports.clone().unwrap_or_default();
    let mut out = Outcome::new(Value::Null);
    if reports.is_empty() {
        out.warnings.push("no report files given; nothing to plot".into());
        out.result = json!({ "plots": [] });
        return Ok(out);
    }
    let mut parsed = Vec::new();
    for p in &reports {
        let v: Value = io::read_json(p).map_err(|e| with_path(e, p))?;
        parsed.push((p, v));
    }
    let mut plots = Vec::new();
    for (p, v) in parsed {
        let raw = v.get("result").and_then(|r| r.get("series")).or_else(|| v.get("series"));
        let Some(raw) = raw else {
            out.warnings.push(format!("{}: no series found, skipped", p.display()));
            continue;
        };
        let series: Vec<Series> =
            serde_json::from_value(raw.clone()).map_err(|e| CliError::input(format!("{}: {e}", p.display())))?;
        for s in series {
            let base = format!("{}-{}", file_stem(p), slug(&s.name));
            out.file(format!("{base}.csv"), s.to_csv());
            match render_svg(&s) {
                Some(svg) => {
                    out.file(format!("{base}.svg"), svg);
                    plots.push(json!({ "series": s.name, "svg": format!("{base}.svg"), "csv": format!("{base}.csv") }));
                }
                None => out.warnings.push(format!("{}: series {:?} has fewer than two points; plot skipped", p.display(), s.name)),
            }
        }
    }
    out.result = json!({ "plots": plots });
    Ok(out)
}

fn dispatch(cfg: &RunConfig) -> CliResult<Outcome> {
    match cfg.command.as_str() {
        "certify" => run_certify(cfg),
        "validate" => run_validate(cfg),
        "gallery" => run_gallery(cfg),
        "she" => run_she(cfg),
        "krr" => run_krr(cfg),
        "corpus" => run_corpus(cfg),
        "plot" => run_plot(cfg),
        other => Err(CliError::input(format!("unknown command {other}"))),
    }
}

/// Summary of a finished run.
#[derive(Debug)]
pub struct RunSummary {
    pub config: RunConfig,
    pub report_path: PathBuf,
    pub written: Vec<PathBuf>,
    pub reused: bool,
    pub exit_code: i32,
    pub message: Option<String>,
}

/// Runs a parsed command, writing its report and side files.
pub fn execute(cli: &Cli) -> CliResult<RunSummary> {
    let cfg = resolve(cli)?;
    let outcome = dispatch(&cfg)?;
    let report_path = cfg.out.join(format!("{}.json", cfg.stem()));
    let mut written = Vec::new();
    let reused = report_path.exists();
    if !reused {
        for (name, bytes) in &outcome.files {
            let p = cfg.out.join(name);
            io::write_atomic(&p, bytes)?;
            written.push(p);
        }
        let report = json!({ "config": cfg, "warnings": outcome.warnings, "result": outcome.result });
        io::write_json(&report_path, &report)?;
        written.push(report_path.clone());
    }
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    let (exit_code, message) = match outcome.failure {
        Some(f) => (f.code, Some(f.message)),
        None => (EXIT_OK, None),
    };
    Ok(RunSummary { config: cfg, report_path, written, reused, exit_code, message })
}

/// Entry point used by the binary; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(s) => {
            if s.reused {
                eprintln!("report already present, left unchanged");
            }
            println!("{}", s.report_path.display());
            if let Some(m) = s.message {
                eprintln!("error: {m}");
            }
            s.exit_code
        }
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}
