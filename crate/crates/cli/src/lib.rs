//! Subcommands of the `fwopt` binary, callable as functions.

pub mod config;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use fwopt::fw::{
    certified_budget, fw_run, Domain, FwOptions, FwResult, LmoMode, Objective, RunTrace, Start, StepSchedule, Stop,
};
use fwopt::linalg::{DenseMat, DenseSym};
use fwopt::matcomp::{
    complete, complete_preset, load_movielens, metrics, split_train_test, zero_baseline, CompletionConfig, DataFormat,
    Normalizer, Preset, RatingDataset, SplitPolicy, StepMetrics,
};
use fwopt::matrix::{RankOne, Spectahedron, SquaredFrobenius};
use fwopt::sdp::{binary_search_objective, load_sdp, solve_eps_feasible, SdpOptions, SdpStatus};
use fwopt::vector::{Cube, L1Ball, LeastSquares, Quadratic, Simplex, SquaredNorm};
use fwopt::FwError;
use rayon::prelude::*;
use serde::Serialize;

use config::{BenchConfig, DomainSpec, ObjectiveSpec, RunConfig, Schedule, Sweep};

pub const EXIT_OK: u8 = 0;
pub const EXIT_UNCERTIFIED: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_DATA: u8 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: u8,
    pub msg: String,
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        Self { code: EXIT_CONFIG, msg: msg.into() }
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Self { code: EXIT_DATA, msg: msg.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.msg)
    }
}

impl std::error::Error for CliError {}

impl From<FwError> for CliError {
    fn from(e: FwError) -> Self {
        let code = match e {
            FwError::Parse { .. } | FwError::Io(_) | FwError::Csv(_) => EXIT_DATA,
            FwError::InvalidInput(_) | FwError::Dimension { .. } => EXIT_CONFIG,
            FwError::NonFinite { .. } | FwError::Lmo(_) => EXIT_UNCERTIFIED,
        };
        Self { code, msg: e.to_string() }
    }
}

fn io_err(path: &Path, e: impl fmt::Display) -> CliError {
    CliError::data(format!("{}: {e}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("summary serializes");
    fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveSummary {
    pub objective: String,
    pub domain: String,
    pub n: usize,
    pub seed: u64,
    pub eps: Option<f64>,
    pub f: f64,
    pub gap: f64,
    /// `null` when the oracle gives no accuracy guarantee.
    pub slack: Option<f64>,
    pub certified: bool,
    pub iterations: usize,
    /// Atoms with positive weight: a sparsity bound for vectors, a rank
    /// bound for matrices.
    pub atoms: usize,
    pub nonzeros: Option<usize>,
    pub curvature: Option<f64>,
    pub budget_k: Option<usize>,
    pub matvecs: u64,
}

pub struct SolveOutcome {
    pub trace: RunTrace,
    pub summary: SolveSummary,
}

impl SolveOutcome {
    pub fn exit_code(&self) -> u8 {
        if self.summary.eps.is_some() && !self.summary.certified {
            EXIT_UNCERTIFIED
        } else {
            EXIT_OK
        }
    }
}

/// Loads the objective data of a least-squares style spec.
fn least_squares_data(
    a: &Option<Vec<Vec<f64>>>,
    b: &Option<Vec<f64>>,
    path: &Option<PathBuf>,
    base: &Path,
) -> Result<(DenseMat, Vec<f64>), CliError> {
    let rows: Vec<Vec<f64>> = match (a, b, path) {
        (Some(a), Some(b), None) => {
            if a.len() != b.len() {
                return Err(CliError::config(format!("`a` has {} rows but `b` has {}", a.len(), b.len())));
            }
            a.iter().zip(b).map(|(r, &bi)| r.iter().copied().chain([bi]).collect()).collect()
        }
        (None, None, Some(p)) => read_rows(&resolve(base, p))?,
        _ => return Err(CliError::config("give either `a` and `b`, or `path`")),
    };
    let cols = rows.first().map_or(0, |r| r.len());
    if cols < 2 || rows.iter().any(|r| r.len() != cols) {
        return Err(CliError::config("least-squares rows must be non-empty and of equal length"));
    }
    let n = cols - 1;
    let data = rows.iter().flat_map(|r| r[..n].iter().copied()).collect();
    let b = rows.iter().map(|r| r[n]).collect();
    Ok((DenseMat::from_rows(rows.len(), n, data), b))
}

fn read_rows(path: &Path) -> Result<Vec<Vec<f64>>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|s| s.parse::<f64>())
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|e| CliError::data(format!("{}:{}: {e}", path.display(), idx + 1)))?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::data(format!("{}: no rows", path.display())));
    }
    Ok(rows)
}

/// `n`, then `n` rows of `Q`, then `c`.
fn quadratic_file(path: &Path) -> Result<Quadratic, CliError> {
    let rows = read_rows(path)?;
    let bad = |msg: &str| CliError::data(format!("{}: {msg}", path.display()));
    let n = match rows[0][..] {
        [n] if n >= 1.0 && n.fract() == 0.0 => n as usize,
        _ => return Err(bad("first line must be the dimension")),
    };
    if rows.len() != n + 2 || rows[1..].iter().any(|r| r.len() != n) {
        return Err(bad(&format!("expected {n} rows of Q and one row c, each of length {n}")));
    }
    let q = DenseSym::from_fn(n, |i, j| 0.5 * (rows[1 + i][j] + rows[1 + j][i]));
    if fwopt::eigen::lambda_min(&q) < -1e-12 * q.frob_norm_sq().sqrt().max(1.0) {
        return Err(bad("Q is not positive semidefinite"));
    }
    Ok(Quadratic::new(q, rows[n + 1].clone()))
}

fn fw_options(cfg: &RunConfig, curvature: Option<f64>, mode: LmoMode) -> Result<(FwOptions, Option<usize>), CliError> {
    let (schedule, stop, budget) = match cfg.eps {
        Some(eps) => {
            let big_k = match curvature {
                Some(c) => certified_budget(c, eps, mode),
                None => return Err(CliError::config("this objective has no curvature bound; set `max_iters`")),
            };
            let schedule = match cfg.schedule {
                Schedule::Harmonic => StepSchedule::FixedAfter(big_k),
                Schedule::LineSearch => StepSchedule::LineSearch,
            };
            (schedule, Stop::gap(eps, cfg.max_iters.unwrap_or(2 * big_k + 1)), Some(big_k))
        }
        None => {
            let schedule = match cfg.schedule {
                Schedule::Harmonic => StepSchedule::Harmonic,
                Schedule::LineSearch => StepSchedule::LineSearch,
            };
            (schedule, Stop::iters(cfg.max_iters.expect("validated")), None)
        }
    };
    let mut opts = FwOptions::new(schedule, stop).seed(cfg.seed).timing(cfg.timing);
    opts.lmo_mode = mode;
    opts.keep_best = cfg.eps.is_some();
    Ok((opts, budget))
}

struct Named<'a> {
    objective: &'a str,
    domain: &'a str,
    n: usize,
}

fn drive<D, O>(
    obj: &O,
    dom: &D,
    start: Start<D::Atom>,
    cfg: &RunConfig,
    mode: LmoMode,
    names: Named<'_>,
    nonzeros: impl Fn(&D::Point) -> Option<usize>,
) -> Result<SolveOutcome, CliError>
where
    D: Domain,
    O: Objective<D::Point, D::Grad>,
{
    let curvature = obj.curvature_bound();
    let (opts, budget_k) = fw_options(cfg, curvature, mode)?;
    let res: FwResult<D> = fw_run(obj, dom, start, &opts)?;
    let summary = SolveSummary {
        objective: names.objective.into(),
        domain: names.domain.into(),
        n: names.n,
        seed: cfg.seed,
        eps: cfg.eps,
        f: res.f,
        gap: res.gap,
        slack: res.slack.is_finite().then_some(res.slack),
        certified: res.certified,
        iterations: res.trace.rows.len().saturating_sub(1),
        atoms: res.ledger.len(),
        nonzeros: nonzeros(&res.point),
        curvature,
        budget_k,
        matvecs: res.trace.total_matvecs(),
    };
    Ok(SolveOutcome { trace: res.trace, summary })
}

fn count_nonzeros(x: &Vec<f64>) -> Option<usize> {
    Some(x.iter().filter(|v| **v != 0.0).count())
}

fn domain_n(spec: Option<usize>, inferred: Option<usize>) -> Result<usize, CliError> {
    match (spec, inferred) {
        (Some(a), Some(b)) if a != b => Err(CliError::config(format!("domain has n = {a} but the objective has {b}"))),
        (Some(a), _) | (None, Some(a)) => {
            if a == 0 {
                Err(CliError::config("n must be positive"))
            } else {
                Ok(a)
            }
        }
        (None, None) => Err(CliError::config("domain needs `n`")),
    }
}

fn positive(t: Option<f64>, what: &str) -> Result<f64, CliError> {
    let t = t.unwrap_or(1.0);
    if t > 0.0 && t.is_finite() {
        Ok(t)
    } else {
        Err(CliError::config(format!("{what} must be positive, got {t}")))
    }
}

enum VectorObjective {
    Norm,
    Ls(LeastSquares),
    Quad(Quadratic),
}

/// Runs a `solve` config; relative paths are taken from `base`.
pub fn run_solve(cfg: &RunConfig, base: &Path) -> Result<SolveOutcome, CliError> {
    cfg.validate()?;
    let (obj_name, vobj, lasso_t) = match &cfg.objective {
        ObjectiveSpec::Quadratic => ("quadratic", VectorObjective::Norm, None),
        ObjectiveSpec::LeastSquares { a, b, path } => {
            let (a, b) = least_squares_data(a, b, path, base)?;
            ("least_squares", VectorObjective::Ls(LeastSquares::new(a, b)), None)
        }
        ObjectiveSpec::Lasso { a, b, path, t } => {
            let (a, b) = least_squares_data(a, b, path, base)?;
            ("lasso", VectorObjective::Ls(LeastSquares::new(a, b)), Some(*t))
        }
        ObjectiveSpec::QuadraticFile { path } => {
            ("quadratic_file", VectorObjective::Quad(quadratic_file(&resolve(base, path))?), None)
        }
    };
    let inferred = match &vobj {
        VectorObjective::Norm => None,
        VectorObjective::Ls(ls) => Some(ls.a.cols),
        VectorObjective::Quad(q) => Some(q.q.n),
    };
    if lasso_t.is_some() && !matches!(cfg.domain, DomainSpec::L1 { .. }) {
        return Err(CliError::config("lasso runs on the l1 domain"));
    }
    macro_rules! vector_run {
        ($dom:expr, $start:expr, $name:expr) => {{
            let dom = $dom;
            let d2 = dom.diameter_sq();
            let names = Named { objective: obj_name, domain: $name, n: dom.n };
            match vobj {
                VectorObjective::Norm => {
                    drive(&SquaredNorm::with_curvature(d2), &dom, $start, cfg, LmoMode::Exact, names, count_nonzeros)
                }
                VectorObjective::Ls(ls) => {
                    drive(&ls.with_diameter_sq(d2), &dom, $start, cfg, LmoMode::Exact, names, count_nonzeros)
                }
                VectorObjective::Quad(q) => {
                    drive(&q.with_diameter_sq(d2), &dom, $start, cfg, LmoMode::Exact, names, count_nonzeros)
                }
            }
        }};
    }
    match &cfg.domain {
        DomainSpec::Simplex { n } => vector_run!(Simplex::new(domain_n(*n, inferred)?), Start::Atom(0), "simplex"),
        DomainSpec::L1 { n, t } => {
            let radius = match (t, lasso_t) {
                (Some(a), Some(b)) if a != &b => {
                    return Err(CliError::config(format!("l1 radius {a} differs from lasso t = {b}")))
                }
                (_, Some(b)) => positive(Some(b), "lasso t")?,
                (t, None) => positive(*t, "l1 radius")?,
            };
            vector_run!(L1Ball::new(domain_n(*n, inferred)?, radius), Start::Origin, "l1")
        }
        DomainSpec::Cube { n } => vector_run!(Cube::new(domain_n(*n, inferred)?), Start::Origin, "cube"),
        DomainSpec::Spectahedron { n, t } => {
            if !matches!(vobj, VectorObjective::Norm) {
                return Err(CliError::config("the spectahedron supports the `quadratic` objective only"));
            }
            let n = domain_n(Some(*n), None)?;
            let t = positive(*t, "trace bound")?;
            let dom = Spectahedron::dense(n, t);
            let obj = SquaredFrobenius { curvature: Some(fwopt::fw::curvature_from_hessian(2.0, dom.diameter_sq())) };
            let mode = if n <= dom.dense_limit { LmoMode::Exact } else { LmoMode::Approx };
            let names = Named { objective: obj_name, domain: "spectahedron", n };
            drive(&obj, &dom, Start::Atom(RankOne::basis(n, 0)), cfg, mode, names, |_| None)
        }
    }
}

/// `solve --config`: writes the trace and summary named in the config.
pub fn cmd_solve(config: &Path) -> Result<(SolveOutcome, u8), CliError> {
    let cfg: RunConfig = config::load_toml(config)?;
    let base = config.parent().unwrap_or(Path::new("."));
    let out = run_solve(&cfg, base)?;
    if let Some(p) = &cfg.output.trace {
        out.trace.save(&resolve(base, p))?;
    }
    if let Some(p) = &cfg.output.summary {
        write_json(&resolve(base, p), &out.summary)?;
    }
    let code = out.exit_code();
    Ok((out, code))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompleteArgs {
    pub data: PathBuf,
    pub format: String,
    pub preset: String,
    pub t: Option<f64>,
    pub steps: Option<usize>,
    pub line_search: Option<bool>,
    pub grad_avg: bool,
    pub split: f64,
    pub seed: u64,
    pub trace: Option<PathBuf>,
    pub metrics: Option<PathBuf>,
    pub summary: Option<PathBuf>,
}

impl CompleteArgs {
    pub fn new(data: PathBuf) -> Self {
        Self {
            data,
            format: "tab_100k".into(),
            preset: "table1".into(),
            t: None,
            steps: None,
            line_search: None,
            grad_avg: false,
            split: 0.5,
            seed: 0,
            trace: None,
            metrics: None,
            summary: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorPair {
    pub rmse: f64,
    pub nmae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompletionSummary {
    pub data: String,
    pub preset: String,
    pub users: usize,
    pub items: usize,
    pub train: usize,
    pub test: usize,
    pub split: f64,
    pub seed: u64,
    pub t: f64,
    pub steps: usize,
    pub line_search: bool,
    pub grad_avg: bool,
    pub train_rmse: f64,
    pub test_rmse: f64,
    pub test_nmae: f64,
    pub f: f64,
    pub gap: f64,
    pub matvecs: u64,
    /// Predicting the mean offsets `(mu_user + mu_item) / 2`.
    pub means_baseline: ErrorPair,
    pub zero_baseline: ErrorPair,
}

pub struct CompleteOutcome {
    pub summary: CompletionSummary,
    pub trace: RunTrace,
    pub history: Vec<StepMetrics>,
}

fn parse_preset(s: &str) -> Result<Preset, CliError> {
    match s {
        "table1" => Ok(Preset::Table1),
        "normalized" => Ok(Preset::Normalized),
        other => Err(CliError::config(format!("unknown preset `{other}` (table1 | normalized)"))),
    }
}

fn completion_config(preset: Preset, t: Option<f64>, steps: Option<usize>, seed: u64) -> Result<CompletionConfig, CliError> {
    let mut cfg = CompletionConfig::for_preset(preset);
    if let Some(t) = t {
        cfg.t = positive(Some(t), "t")?;
    }
    if let Some(s) = steps {
        cfg.steps = s;
    }
    cfg.seed = seed;
    Ok(cfg)
}

pub fn load_split(data: &Path, format: &str, split: f64, seed: u64) -> Result<RatingDataset, CliError> {
    let format: DataFormat = format.parse().map_err(|e: FwError| CliError::config(e.to_string()))?;
    if !(0.0..=1.0).contains(&split) {
        return Err(CliError::config(format!("split must lie in [0, 1], got {split}")));
    }
    let raw = load_movielens(data, format)?;
    Ok(split_train_test(&raw, SplitPolicy::RandomFraction { rho: split, seed })?)
}

fn means_baseline(ds: &RatingDataset) -> ErrorPair {
    let norm = Normalizer::fit(ds);
    let preds: Vec<f64> = ds.test.iter().map(|e| norm.offset(e.0, e.1)).collect();
    let (rmse, nmae) = metrics(&preds, &ds.test);
    ErrorPair { rmse, nmae }
}

pub fn run_complete(args: &CompleteArgs) -> Result<CompleteOutcome, CliError> {
    let preset = parse_preset(&args.preset)?;
    let mut cfg = completion_config(preset, args.t, args.steps, args.seed)?;
    if let Some(ls) = args.line_search {
        cfg.line_search = ls;
    }
    cfg.grad_averaging = args.grad_avg;
    let ds = load_split(&args.data, &args.format, args.split, args.seed)?;
    let (out, _) = complete_preset(&ds, preset, &cfg)?;
    let m = out.final_metrics;
    let (zr, zn) = zero_baseline(&ds.test);
    let summary = CompletionSummary {
        data: args.data.display().to_string(),
        preset: args.preset.clone(),
        users: ds.m,
        items: ds.n,
        train: ds.train.len(),
        test: ds.test.len(),
        split: args.split,
        seed: args.seed,
        t: cfg.t,
        steps: cfg.steps,
        line_search: cfg.line_search,
        grad_avg: cfg.grad_averaging,
        train_rmse: m.train_rmse,
        test_rmse: m.test_rmse,
        test_nmae: m.test_nmae,
        f: out.f,
        gap: out.gap,
        matvecs: out.matvecs,
        means_baseline: means_baseline(&ds),
        zero_baseline: ErrorPair { rmse: zr, nmae: zn },
    };
    Ok(CompleteOutcome { summary, trace: out.trace, history: out.history })
}

fn history_csv(history: &[StepMetrics]) -> String {
    let mut s = String::from("k,train_rmse,test_rmse,test_nmae\n");
    for h in history {
        s.push_str(&format!("{},{},{},{}\n", h.k, h.train_rmse, h.test_rmse, h.test_nmae));
    }
    s
}

pub fn cmd_complete(args: &CompleteArgs) -> Result<CompleteOutcome, CliError> {
    let out = run_complete(args)?;
    if let Some(p) = &args.trace {
        out.trace.save(p)?;
    }
    if let Some(p) = &args.metrics {
        fs::write(p, history_csv(&out.history)).map_err(|e| io_err(p, e))?;
    }
    if let Some(p) = &args.summary {
        write_json(p, &out.summary)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpArgs {
    pub problem: PathBuf,
    pub eps: f64,
    pub rounds: usize,
    pub seed: u64,
    pub trace: Option<PathBuf>,
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SdpSummary {
    pub problem: String,
    pub n: usize,
    pub m: usize,
    pub t: f64,
    pub eps: f64,
    pub seed: u64,
    pub status: String,
    pub max_violation: f64,
    pub f: f64,
    pub lower_bound: Option<f64>,
    pub sigma: f64,
    pub eig_calls: usize,
    pub budget: usize,
    /// Bracket on `max C • X` when the file has an objective.
    pub objective_lo: Option<f64>,
    pub objective_hi: Option<f64>,
}

fn status_name(s: SdpStatus) -> &'static str {
    match s {
        SdpStatus::Feasible => "feasible",
        SdpStatus::Infeasible => "infeasible",
        SdpStatus::Undetermined => "undetermined",
    }
}

pub fn cmd_sdpfeas(args: &SdpArgs) -> Result<(SdpSummary, u8), CliError> {
    if !(args.eps > 0.0) || !args.eps.is_finite() {
        return Err(CliError::config(format!("eps must be positive, got {}", args.eps)));
    }
    let problem = load_sdp(&args.problem)?;
    let opts = SdpOptions { seed: args.seed, ..Default::default() };
    let sol = solve_eps_feasible(&problem.sdp, args.eps, &opts)?;
    if let Some(p) = &args.trace {
        sol.trace.save(p)?;
    }
    let bracket = match &problem.objective {
        Some(c) => Some(binary_search_objective(c, &problem.sdp, args.eps, None, args.rounds, &opts)?),
        None => None,
    };
    let summary = SdpSummary {
        problem: args.problem.display().to_string(),
        n: problem.sdp.n,
        m: problem.sdp.m(),
        t: problem.sdp.t,
        eps: args.eps,
        seed: args.seed,
        status: status_name(sol.status).into(),
        max_violation: sol.max_violation,
        f: sol.f,
        lower_bound: sol.lower_bound.is_finite().then_some(sol.lower_bound),
        sigma: sol.sigma,
        eig_calls: sol.eig_calls,
        budget: sol.budget,
        objective_lo: bracket.as_ref().map(|b| b.lo),
        objective_hi: bracket.as_ref().map(|b| b.hi),
    };
    if let Some(p) = &args.summary {
        write_json(p, &summary)?;
    }
    let code = if sol.status == SdpStatus::Undetermined { EXIT_UNCERTIFIED } else { EXIT_OK };
    Ok((summary, code))
}

fn csv_text(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

/// Runs a sweep and returns the CSV text.
pub fn run_bench(cfg: &BenchConfig, base: &Path) -> Result<String, CliError> {
    match &cfg.sweep {
        Sweep::Completion { data, format, split, seed, preset, t, steps, param, values } => {
            let header = ["param", "value", "train_rmse", "test_rmse", "test_nmae", "matvecs"];
            if !matches!(param.as_str(), "t" | "steps") {
                return Err(CliError::config(format!("completion sweeps take param `t` or `steps`, not `{param}`")));
            }
            let preset = parse_preset(preset)?;
            let base_cfg = completion_config(preset, *t, *steps, *seed)?;
            if values.is_empty() {
                return Ok(csv_text(&header, &[]));
            }
            let ds = load_split(&resolve(base, data), format, *split, *seed)?;
            let (ds, _) = match preset {
                Preset::Normalized => {
                    let (d, n) = fwopt::matcomp::normalize_means(&ds);
                    (d, Some(n))
                }
                Preset::Table1 => (ds, None),
            };
            let rows = values
                .par_iter()
                .map(|&v| {
                    let mut c = base_cfg.clone();
                    match param.as_str() {
                        "t" => c.t = positive(Some(v), "t")?,
                        _ => c.steps = whole(v, "steps")?,
                    }
                    let out = complete(&ds, &c)?;
                    let m = out.final_metrics;
                    Ok(vec![
                        param.clone(),
                        v.to_string(),
                        m.train_rmse.to_string(),
                        m.test_rmse.to_string(),
                        m.test_nmae.to_string(),
                        out.matvecs.to_string(),
                    ])
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            Ok(csv_text(&header, &rows))
        }
        Sweep::Solve { run, param, values } => {
            let header = ["param", "value", "f", "gap", "certified", "iterations", "atoms"];
            let rows = values
                .par_iter()
                .map(|&v| {
                    let cfg = with_param(run, param, v)?;
                    let s = run_solve(&cfg, base)?.summary;
                    Ok(vec![
                        param.clone(),
                        v.to_string(),
                        s.f.to_string(),
                        s.gap.to_string(),
                        s.certified.to_string(),
                        s.iterations.to_string(),
                        s.atoms.to_string(),
                    ])
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            Ok(csv_text(&header, &rows))
        }
        Sweep::Envelope { run, f_star } => {
            let header = ["k", "f", "gap", "error", "bound"];
            let out = run_solve(run, base)?;
            let c = out
                .summary
                .curvature
                .ok_or_else(|| CliError::config("envelope needs an objective with a curvature bound"))?;
            let f_star = f_star.unwrap_or_else(|| {
                out.trace.rows.iter().map(|r| r.f - r.certified_gap()).fold(f64::NEG_INFINITY, f64::max)
            });
            let rows: Vec<Vec<String>> = out
                .trace
                .rows
                .iter()
                .map(|r| {
                    vec![
                        r.k.to_string(),
                        r.f.to_string(),
                        r.gap.to_string(),
                        (r.f - f_star).to_string(),
                        (8.0 * c / (r.k as f64 + 2.0)).to_string(),
                    ]
                })
                .collect();
            Ok(csv_text(&header, &rows))
        }
    }
}

fn whole(v: f64, what: &str) -> Result<usize, CliError> {
    if v >= 0.0 && v.fract() == 0.0 && v.is_finite() {
        Ok(v as usize)
    } else {
        Err(CliError::config(format!("{what} must be a whole number, got {v}")))
    }
}

fn with_param(run: &RunConfig, param: &str, v: f64) -> Result<RunConfig, CliError> {
    let mut cfg = run.clone();
    match param {
        "n" => {
            let n = Some(whole(v, "n")?);
            match &mut cfg.domain {
                DomainSpec::Simplex { n: x } | DomainSpec::L1 { n: x, .. } | DomainSpec::Cube { n: x } => *x = n,
                DomainSpec::Spectahedron { n: x, .. } => *x = n.unwrap_or(0),
            }
        }
        "t" => {
            if let ObjectiveSpec::Lasso { t, .. } = &mut cfg.objective {
                *t = v;
                if let DomainSpec::L1 { t: dt, .. } = &mut cfg.domain {
                    *dt = None;
                }
            } else {
                match &mut cfg.domain {
                    DomainSpec::L1 { t, .. } | DomainSpec::Spectahedron { t, .. } => *t = Some(v),
                    _ => return Err(CliError::config("param `t` needs an l1 or spectahedron domain")),
                }
            }
        }
        "max_iters" => cfg.max_iters = Some(whole(v, "max_iters")?),
        "eps" => cfg.eps = Some(v),
        "seed" => cfg.seed = whole(v, "seed")? as u64,
        other => return Err(CliError::config(format!("unknown sweep param `{other}`"))),
    }
    Ok(cfg)
}

pub fn cmd_bench(config: &Path, output: Option<&Path>) -> Result<PathBuf, CliError> {
    let cfg: BenchConfig = config::load_toml(config)?;
    let base = config.parent().unwrap_or(Path::new("."));
    let csv = run_bench(&cfg, base)?;
    let out = output.map(Path::to_path_buf).unwrap_or_else(|| resolve(base, &cfg.output));
    fs::write(&out, csv).map_err(|e| io_err(&out, e))?;
    Ok(out)
}
