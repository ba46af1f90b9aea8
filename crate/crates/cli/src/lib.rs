//! `slc` front end: argument parsing, dispatch to the core library and the
//! exit-code contract (0 success, 2 refuted or violated, 3 undetermined,
//! 64 usage). Every run that ends in 0, 2 or 3 writes one JSON document.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use slc_core::certify::{
    certify_slc_1d, certify_slc_binomial, certify_slc_discrete, certify_slc_nd, check_alpha_1d, SlcCertificate, Verdict,
};
use slc_core::corpus::{gen_corpus, CorpusEntry};
use slc_core::engine::{sample, Integrator};
use slc_core::inequalities::{
    brascamp_lieb_gap_with, characterization_diagnostic, chebyshev_cov_continuous_with, chebyshev_cov_discrete,
    gap_battery, moment_chain_pmf, moment_chain_with, parse_dictionary, stein_gap_binomial, stein_gap_gaussian_with,
    stein_gap_poisson, u_ratio_estimate_with, weighted_poincare_gap_with, Diagnostic, GapReport, InequalityId,
    DEFAULT_EQUALITY_TOL, DEFAULT_PAIRS,
};
use slc_core::model::Support;
use slc_core::{ContinuousModel, DiscretePmf, Error, Model, ModelConfig, QuadratureSpec, SymMat, TestFunction};

pub const EXIT_OK: i32 = 0;
pub const EXIT_REFUTED: i32 = 2;
pub const EXIT_UNDETERMINED: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

const DEFAULT_GRID_1D: usize = 2001;

#[derive(Parser, Debug)]
#[command(name = "slc", version, about = "Strong log-concavity certificates and Stein-type inequality gaps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Certify SLC(α) / SLC(Σ) and report α*
    Certify(CertifyArgs),
    /// Evaluate one inequality as a signed gap
    Gap(GapArgs),
    /// Moment chain and closed moment bound up to order 2·rmax
    Moments(MomentsArgs),
    /// Lower estimate of U(X, Σ) over a polynomial dictionary
    UEstimate(UArgs),
    /// Draw samples from a 1D continuous model
    Sample(SampleArgs),
    /// Certify, run the default gap battery, and report equality cases
    Diagnose(DiagnoseArgs),
    /// Emit a seeded corpus of SLC model configs
    GenCorpus(CorpusArgs),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// relative quadrature tolerance
    #[arg(long)]
    rtol: Option<f64>,
    /// absolute quadrature tolerance
    #[arg(long)]
    atol: Option<f64>,
    /// integrate where φ − min φ stays below this many nats
    #[arg(long)]
    energy_budget: Option<f64>,
    /// cap on quadrature cells
    #[arg(long)]
    max_subdiv: Option<usize>,
    /// relative threshold for flagging a gap as zero
    #[arg(long, default_value_t = DEFAULT_EQUALITY_TOL)]
    equality_tol: f64,
    /// write the JSON document here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CertifyArgs {
    /// model config (JSON5)
    config: PathBuf,
    /// check this α instead of only reporting α*
    #[arg(long, conflicts_with = "sigma")]
    alpha: Option<f64>,
    /// JSON matrix (or a number in 1D)
    #[arg(long)]
    sigma: Option<PathBuf>,
    /// grid points (1D) or points per axis (d > 1)
    #[arg(long)]
    grid: Option<usize>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct GapArgs {
    /// model config (JSON5)
    config: PathBuf,
    /// brascamp_lieb, weighted_poincare, chebyshev, stein_gaussian, stein_poisson,
    /// stein_binomial, moment_chain or u_ratio
    #[arg(long)]
    ineq: InequalityId,
    /// SLC parameter; defaults to the certified α*
    #[arg(long)]
    alpha: Option<f64>,
    /// JSON file holding Σ (a matrix, or a number in 1D)
    #[arg(long)]
    sigma: Option<PathBuf>,
    /// inline JSON5 test function; repeat for several (chebyshev takes u then v)
    #[arg(long = "test-fn")]
    test_fn: Vec<String>,
    /// dictionary for u_ratio, e.g. poly:3
    #[arg(long)]
    dict: Option<String>,
    /// highest chain order for moment_chain
    #[arg(long)]
    rmax: Option<usize>,
    /// seed for the paired-sample cross-check (continuous chebyshev)
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct MomentsArgs {
    /// model config (JSON5)
    config: PathBuf,
    #[arg(long)]
    alpha: f64,
    /// highest chain order r
    #[arg(long, default_value_t = 4)]
    rmax: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct UArgs {
    /// model config (JSON5)
    config: PathBuf,
    /// JSON file holding Σ (a matrix, or a number in 1D)
    #[arg(long)]
    sigma: Option<PathBuf>,
    /// 1D shorthand for Σ = α
    #[arg(long)]
    alpha: Option<f64>,
    /// polynomial dictionary poly:k (1 ≤ k ≤ 8)
    #[arg(long, default_value = "poly:1")]
    dict: String,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct SampleArgs {
    /// model config (JSON5)
    config: PathBuf,
    /// number of samples
    #[arg(long, short = 'n', default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct DiagnoseArgs {
    /// model config (JSON5)
    config: PathBuf,
    /// JSON file holding Σ; needed for d > 1 when the family has no natural Σ
    #[arg(long)]
    sigma: Option<PathBuf>,
    /// grid points (1D) or points per axis (d > 1)
    #[arg(long)]
    grid: Option<usize>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct CorpusArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// number of models
    #[arg(long, default_value_t = 200)]
    count: usize,
    /// also write each member as <name>.json into this directory
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// write the JSON document here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

/// Options a run was evaluated with, echoed for reproducibility.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quadrature: Option<QuadratureSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub equality_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inequality: Option<InequalityId>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub test_functions: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dictionary: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rmax: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub tool: ToolInfo,
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<ModelConfig>,
    pub options: RunOptions,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<SlcCertificate>,
    pub reports: Vec<GapReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<Diagnostic>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corpus: Option<Vec<CorpusEntry>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// set when a numerical failure left the result undetermined
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub exit_code: i32,
    pub wall_clock_s: f64,
}

impl RunReport {
    fn new(command: &str) -> Self {
        RunReport {
            tool: ToolInfo { name: "slc".into(), version: env!("CARGO_PKG_VERSION").into() },
            command: command.into(),
            config: None,
            options: RunOptions::default(),
            certificate: None,
            reports: Vec::new(),
            diagnostic: None,
            samples: None,
            corpus: None,
            seed: None,
            error: None,
            exit_code: EXIT_OK,
            wall_clock_s: 0.0,
        }
    }
}

/// Failure of a run before a document could be completed.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::BudgetExhausted { .. }
            | Error::NonFinite(_)
            | Error::BoundaryMargin { .. }
            | Error::SingularHessian(_) => Failure::Numerical(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn read_text(path: &Path) -> Outcome<String> {
    std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
}

fn load_config(path: &Path) -> Outcome<(ModelConfig, Model)> {
    let cfg = ModelConfig::parse(&read_text(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let model = cfg.build().map_err(|e| usage(format!("{}: {e}", path.display())))?;
    Ok((cfg, model))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SigmaDoc {
    Scalar(f64),
    Matrix(Vec<Vec<f64>>),
}

fn load_sigma(path: &Path) -> Outcome<SymMat> {
    let doc: SigmaDoc = serde_json::from_str(&read_text(path)?)
        .map_err(|e| usage(format!("{}: expected a JSON matrix or number: {e}", path.display())))?;
    let m = match doc {
        SigmaDoc::Scalar(s) => SymMat::scalar(s),
        SigmaDoc::Matrix(rows) => SymMat::from_rows(&rows)?,
    };
    Ok(m)
}

fn quadrature(c: &Common) -> Outcome<QuadratureSpec> {
    let mut q = QuadratureSpec::default();
    if let Some(v) = c.rtol {
        q.rtol = v;
    }
    if let Some(v) = c.atol {
        q.atol = v;
    }
    if let Some(v) = c.energy_budget {
        q.energy_budget = v;
    }
    if let Some(v) = c.max_subdiv {
        q.max_subdiv = v;
    }
    q.validate()?;
    if !(c.equality_tol > 0.0) {
        return Err(usage("--equality-tol must be positive"));
    }
    Ok(q)
}

fn continuous(model: &Model) -> Outcome<&ContinuousModel> {
    match model {
        Model::Continuous(m) => Ok(m),
        Model::Discrete(_) => Err(usage("this operation needs a continuous model")),
    }
}

fn discrete(model: &Model) -> Outcome<&DiscretePmf> {
    match model {
        Model::Discrete(p) => Ok(p),
        Model::Continuous(_) => Err(usage("this operation needs a discrete model")),
    }
}

fn default_grid(dim: usize) -> usize {
    match dim {
        1 => DEFAULT_GRID_1D,
        2 => 61,
        _ => 15,
    }
}

/// Σ from --sigma, else α (1D), else the model's own Σ.
fn resolve_sigma(m: &ContinuousModel, sigma: Option<&Path>, alpha: Option<f64>) -> Outcome<SymMat> {
    let s = match (sigma, alpha) {
        (Some(p), _) => load_sigma(p)?,
        (None, Some(a)) if m.dim() == 1 => SymMat::scalar(a),
        _ => m.natural_sigma().ok_or_else(|| usage(format!("a {}-dimensional model needs --sigma", m.dim())))?,
    };
    if s.dim() != m.dim() {
        return Err(Error::DimensionMismatch { expected: m.dim(), got: s.dim() }.into());
    }
    Ok(s)
}

/// Certificate for any model kind; finite-support pmfs use the binomial-type
/// condition, at the supplied α or at their least α.
fn certify_model(
    model: &Model,
    alpha: Option<f64>,
    sigma: Option<&Path>,
    grid: Option<usize>,
    spec: &QuadratureSpec,
) -> Outcome<SlcCertificate> {
    if let Some(a) = alpha {
        if !(a > 0.0) {
            return Err(usage(format!("--alpha must be positive, got {a}")));
        }
    }
    let cert = match model {
        Model::Continuous(m) if m.dim() == 1 && sigma.is_none() => {
            let c = certify_slc_1d(m, grid.unwrap_or(DEFAULT_GRID_1D), spec)?;
            match alpha {
                Some(a) => check_alpha_1d(&c, a),
                None => c,
            }
        }
        Model::Continuous(m) => {
            let s = resolve_sigma(m, sigma, alpha)?;
            certify_slc_nd(m, &s, grid.unwrap_or(default_grid(m.dim())), spec)?
        }
        Model::Discrete(p) => match p.support() {
            Support::Naturals => certify_slc_discrete(p, alpha)?,
            Support::Finite(_) => {
                let first = certify_slc_binomial(p, alpha.unwrap_or(1.0))?;
                match (alpha, first.alpha_star) {
                    (Some(_), _) => first,
                    (None, Some(a)) => certify_slc_binomial(p, a)?,
                    (None, None) => {
                        let mut c = first;
                        c.verdict = Verdict::RefutedOnWindow;
                        c.candidate_alpha = None;
                        c.notes.push("u is not non-increasing for any α".into());
                        c
                    }
                }
            }
        },
    };
    Ok(cert)
}

fn with_tol(reports: Vec<GapReport>, rel: f64) -> Vec<GapReport> {
    reports.into_iter().map(|r| r.with_equality_tol(rel)).collect()
}

fn gap_exit(reports: &[GapReport]) -> i32 {
    if reports.iter().any(GapReport::violated) {
        EXIT_REFUTED
    } else {
        EXIT_OK
    }
}

fn cmd_certify(a: &CertifyArgs, rep: &mut RunReport) -> Outcome<i32> {
    let spec = quadrature(&a.common)?;
    let (cfg, model) = load_config(&a.config)?;
    rep.config = Some(cfg);
    rep.options.quadrature = Some(spec);
    rep.options.alpha = a.alpha;
    rep.options.grid = a.grid;
    let cert = certify_model(&model, a.alpha, a.sigma.as_deref(), a.grid, &spec)?;
    rep.options.sigma = cert.sigma.clone();
    let code = cert.verdict.exit_code();
    rep.certificate = Some(cert);
    Ok(code)
}

fn require_alpha(alpha: Option<f64>, ineq: InequalityId) -> Outcome<f64> {
    alpha.ok_or_else(|| usage(format!("{ineq} needs --alpha")))
}

fn parse_test_fns(docs: &[String]) -> Outcome<Vec<TestFunction>> {
    docs.iter().map(|d| TestFunction::parse(d).map_err(Failure::from)).collect()
}

fn cmd_gap(a: &GapArgs, rep: &mut RunReport) -> Outcome<i32> {
    let spec = quadrature(&a.common)?;
    let (cfg, model) = load_config(&a.config)?;
    rep.config = Some(cfg);
    rep.options.quadrature = Some(spec);
    rep.options.alpha = a.alpha;
    rep.options.inequality = Some(a.ineq);
    rep.options.test_functions = a.test_fn.clone();
    rep.options.dictionary = a.dict.clone();
    rep.options.rmax = a.rmax;
    let fns = parse_test_fns(&a.test_fn)?;
    let needs_fn = !matches!(a.ineq, InequalityId::MomentChain | InequalityId::URatio);
    if needs_fn && fns.is_empty() {
        return Err(usage(format!("{} needs --test-fn", a.ineq)));
    }
    let mut reports = Vec::new();
    match a.ineq {
        InequalityId::SteinGaussian => {
            let alpha = require_alpha(a.alpha, a.ineq)?;
            let it = Integrator::new(continuous(&model)?, &spec)?;
            for v in &fns {
                reports.push(stein_gap_gaussian_with(&it, alpha, v)?);
            }
        }
        InequalityId::SteinPoisson => {
            let alpha = require_alpha(a.alpha, a.ineq)?;
            let p = discrete(&model)?;
            for v in &fns {
                reports.push(stein_gap_poisson(p, alpha, v)?);
            }
        }
        InequalityId::SteinBinomial => {
            let alpha = require_alpha(a.alpha, a.ineq)?;
            let p = discrete(&model)?;
            for v in &fns {
                reports.push(stein_gap_binomial(p, alpha, v)?);
            }
        }
        InequalityId::BrascampLieb => {
            let it = Integrator::new(continuous(&model)?, &spec)?;
            for g in &fns {
                reports.push(brascamp_lieb_gap_with(&it, g)?);
            }
        }
        InequalityId::WeightedPoincare => {
            let m = continuous(&model)?;
            let sigma = resolve_sigma(m, a.sigma.as_deref(), a.alpha)?;
            rep.options.sigma = Some(sigma.to_rows());
            let it = Integrator::new(m, &spec)?;
            for g in &fns {
                reports.push(weighted_poincare_gap_with(&it, &sigma, g)?);
            }
        }
        InequalityId::Chebyshev => {
            let [u, v] = fns.as_slice() else {
                return Err(usage("chebyshev needs exactly two --test-fn values (u, then v)"));
            };
            match &model {
                Model::Discrete(p) => reports.push(chebyshev_cov_discrete(p, u, v)?),
                Model::Continuous(m) => {
                    let seed = a.seed.unwrap_or(0);
                    rep.seed = Some(seed);
                    let it = Integrator::new(m, &spec)?;
                    reports.push(chebyshev_cov_continuous_with(&it, u, v, DEFAULT_PAIRS, seed)?);
                }
            }
        }
        InequalityId::MomentChain => {
            let alpha = require_alpha(a.alpha, a.ineq)?;
            reports.push(moments(&model, alpha, a.rmax.unwrap_or(4), &spec)?);
        }
        InequalityId::URatio => {
            let m = continuous(&model)?;
            let sigma = resolve_sigma(m, a.sigma.as_deref(), a.alpha)?;
            rep.options.sigma = Some(sigma.to_rows());
            let dict = parse_dictionary(a.dict.as_deref().unwrap_or("poly:1"), m.dim())?;
            let it = Integrator::new(m, &spec)?;
            reports.push(u_ratio_estimate_with(&it, &sigma, &dict)?);
        }
    }
    rep.reports = with_tol(reports, a.common.equality_tol);
    Ok(gap_exit(&rep.reports))
}

fn moments(model: &Model, alpha: f64, rmax: usize, spec: &QuadratureSpec) -> Outcome<GapReport> {
    Ok(match model {
        Model::Continuous(m) => moment_chain_with(&Integrator::new(m, spec)?, alpha, rmax)?,
        Model::Discrete(p) => moment_chain_pmf(p, alpha, rmax)?,
    })
}

fn cmd_moments(a: &MomentsArgs, rep: &mut RunReport) -> Outcome<i32> {
    let spec = quadrature(&a.common)?;
    let (cfg, model) = load_config(&a.config)?;
    rep.config = Some(cfg);
    rep.options.quadrature = Some(spec);
    rep.options.alpha = Some(a.alpha);
    rep.options.rmax = Some(a.rmax);
    rep.reports = with_tol(vec![moments(&model, a.alpha, a.rmax, &spec)?], a.common.equality_tol);
    // outside the continuous setting a negative entry is not a violation of anything proven
    let theorem: Vec<GapReport> = rep.reports.iter().filter(|r| r.theorem).cloned().collect();
    Ok(gap_exit(&theorem))
}

fn cmd_u(a: &UArgs, rep: &mut RunReport) -> Outcome<i32> {
    let spec = quadrature(&a.common)?;
    let (cfg, model) = load_config(&a.config)?;
    rep.config = Some(cfg);
    rep.options.quadrature = Some(spec);
    rep.options.dictionary = Some(a.dict.clone());
    let m = continuous(&model)?;
    let sigma = resolve_sigma(m, a.sigma.as_deref(), a.alpha)?;
    rep.options.sigma = Some(sigma.to_rows());
    let dict = parse_dictionary(&a.dict, m.dim())?;
    let it = Integrator::new(m, &spec)?;
    rep.reports = with_tol(vec![u_ratio_estimate_with(&it, &sigma, &dict)?], a.common.equality_tol);
    Ok(gap_exit(&rep.reports))
}

fn cmd_sample(a: &SampleArgs, rep: &mut RunReport) -> Outcome<i32> {
    let spec = quadrature(&a.common)?;
    let (cfg, model) = load_config(&a.config)?;
    rep.config = Some(cfg);
    rep.options.quadrature = Some(spec);
    rep.options.count = Some(a.n);
    rep.seed = Some(a.seed);
    rep.samples = Some(sample(continuous(&model)?, a.n, a.seed, &spec)?);
    Ok(EXIT_OK)
}

fn cmd_diagnose(a: &DiagnoseArgs, rep: &mut RunReport) -> Outcome<i32> {
    let spec = quadrature(&a.common)?;
    let (cfg, model) = load_config(&a.config)?;
    rep.config = Some(cfg);
    rep.options.quadrature = Some(spec);
    rep.options.grid = a.grid;
    rep.options.equality_tol = Some(a.common.equality_tol);
    let cert = certify_model(&model, None, a.sigma.as_deref(), a.grid, &spec)?;
    let mut code = cert.verdict.exit_code();
    if cert.is_certified() {
        rep.reports = gap_battery(&model, &cert, &spec, a.common.equality_tol)?;
        code = gap_exit(&rep.reports);
    }
    rep.diagnostic = Some(characterization_diagnostic(&cert, &rep.reports));
    rep.options.sigma = cert.sigma.clone();
    rep.certificate = Some(cert);
    Ok(code)
}

fn cmd_corpus(a: &CorpusArgs, rep: &mut RunReport) -> Outcome<i32> {
    if a.count < 1 {
        return Err(usage("--count must be at least 1"));
    }
    rep.seed = Some(a.seed);
    rep.options.count = Some(a.count);
    let corpus = gen_corpus(a.seed, a.count);
    if let Some(dir) = &a.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| usage(format!("cannot create {}: {e}", dir.display())))?;
        for e in &corpus {
            let path = dir.join(format!("{}.json", e.name));
            let text = serde_json::to_string_pretty(&e.config).expect("config serializes");
            std::fs::write(&path, text + "\n").map_err(|e| usage(format!("cannot write {}: {e}", path.display())))?;
        }
    }
    rep.corpus = Some(corpus);
    Ok(EXIT_OK)
}

/// Parses `argv` (program name first), runs the command and writes the JSON
/// document to `stdout` (or `--out`). Returns the process exit code.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{}", e.render());
                    EXIT_OK
                }
                _ => {
                    let _ = write!(stderr, "{}", e.render());
                    EXIT_USAGE
                }
            };
        }
    };
    let start = Instant::now();
    let (name, out) = match &cli.command {
        Command::Certify(a) => ("certify", a.common.out.clone()),
        Command::Gap(a) => ("gap", a.common.out.clone()),
        Command::Moments(a) => ("moments", a.common.out.clone()),
        Command::UEstimate(a) => ("u-estimate", a.common.out.clone()),
        Command::Sample(a) => ("sample", a.common.out.clone()),
        Command::Diagnose(a) => ("diagnose", a.common.out.clone()),
        Command::GenCorpus(a) => ("gen-corpus", a.out.clone()),
    };
    let mut rep = RunReport::new(name);
    let outcome = match &cli.command {
        Command::Certify(a) => cmd_certify(a, &mut rep),
        Command::Gap(a) => cmd_gap(a, &mut rep),
        Command::Moments(a) => cmd_moments(a, &mut rep),
        Command::UEstimate(a) => cmd_u(a, &mut rep),
        Command::Sample(a) => cmd_sample(a, &mut rep),
        Command::Diagnose(a) => cmd_diagnose(a, &mut rep),
        Command::GenCorpus(a) => cmd_corpus(a, &mut rep),
    };
    let code = match outcome {
        Ok(c) => c,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(stderr, "slc {name}: {msg}");
            return EXIT_USAGE;
        }
        Err(Failure::Numerical(msg)) => {
            let _ = writeln!(stderr, "slc {name}: {msg}");
            rep.error = Some(msg);
            EXIT_UNDETERMINED
        }
    };
    rep.exit_code = code;
    rep.wall_clock_s = start.elapsed().as_secs_f64();
    let text = serde_json::to_string_pretty(&rep).expect("report serializes") + "\n";
    match out {
        Some(path) => {
            if let Err(e) = std::fs::write(&path, text) {
                let _ = writeln!(stderr, "slc {name}: cannot write {}: {e}", path.display());
                return EXIT_USAGE;
            }
        }
        None => {
            let _ = stdout.write_all(text.as_bytes());
        }
    }
    code
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_str(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(std::iter::once("slc").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    fn fixture(name: &str) -> String {
        format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
    }

    #[test]
    fn in_process_certify_round_trips() {
        let (code, out, _) = run_str(&["certify", &fixture("poisson3.json")]);
        assert_eq!(code, EXIT_OK);
        let rep: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(rep["command"], "certify");
        assert_eq!(rep["exit_code"], 0);
        let a = rep["certificate"]["alpha_star"].as_f64().unwrap();
        assert!((a - 3.0).abs() < 1e-10);
        assert_eq!(rep["config"]["family"], "poisson");
    }

    #[test]
    fn error_classes_map_to_exit_codes() {
        assert!(matches!(Failure::from(Error::BudgetExhausted { max_subdiv: 1, error: 1.0 }), Failure::Numerical(_)));
        assert!(matches!(Failure::from(Error::SingularHessian(vec![0.0])), Failure::Numerical(_)));
        assert!(matches!(Failure::from(Error::Config("x".into())), Failure::Usage(_)));
        assert!(matches!(Failure::from(Error::NotIncreasing("x".into())), Failure::Usage(_)));
        let (code, out, err) = run_str(&["moments", &fixture("quartic.json")]);
        assert_eq!(code, EXIT_USAGE);
        assert!(out.is_empty() && err.contains("--alpha"));
        let (code, out, err) = run_str(&["--help"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("certify") && err.is_empty());
    }

    #[test]
    fn sigma_file_accepts_scalar_and_matrix() {
        let dir = std::env::temp_dir().join(format!("slc-sigma-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let s = dir.join("s.json");
        std::fs::write(&s, "2.5").unwrap();
        assert_eq!(load_sigma(&s).unwrap().get(0, 0), 2.5);
        std::fs::write(&s, "[[1, 0.5], [0.5, 2]]").unwrap();
        assert_eq!(load_sigma(&s).unwrap().get(1, 0), 0.5);
        std::fs::write(&s, "{\"Sigma\": 1}").unwrap();
        assert!(matches!(load_sigma(&s), Err(Failure::Usage(_))));
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn default_grid_shrinks_with_dimension() {
        assert_eq!(default_grid(1), DEFAULT_GRID_1D);
        assert!(default_grid(3) < default_grid(2));
    }
}
