use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sparsedag::ci::{union_ci_population, union_ci_sample};
use sparsedag::diagnostics::{condition_report, ConditionOptions};
use sparsedag::equivalence::{class_summary, min_trace_permutation, EnumerationMode};
use sparsedag::io::{read_matrix_file, to_json_line, to_json_string, DagJson, EdgeJson, FitJson};
use sparsedag::pls::SolveMode;
use sparsedag::sampling::random_permutations;
use sparsedag::search::{estimated_permutations, exhaustive_global, global_minimizer_dp, restricted_minimizer};
use sparsedag::sim::{run_experiment, sweep_n, ExperimentReport, SimConfig};
use sparsedag::{CovarianceMatrix, DataMatrix, Error, PenaltyFamily, PenaltySpec, Permutation};

use crate::args::*;

/// Exit code 2: bad flags or unreadable inputs.
/// Exit code 1: the computation itself failed.
#[derive(Debug)]
pub enum CliError {
    Usage { flag: &'static str, message: String },
    Compute(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage { .. } => 2,
            CliError::Compute(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage { flag, message } => write!(f, "invalid value for --{flag}: {message}"),
            CliError::Compute(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Compute(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(flag: &'static str, message: impl fmt::Display) -> CliError {
    CliError::Usage {
        flag,
        message: message.to_string(),
    }
}

/// Global flags after defaults are applied.
pub struct Context {
    pub seed: u64,
    pub seed_given: bool,
    pub out: Option<PathBuf>,
}

impl Context {
    fn write(&self, text: &str) -> CliResult<()> {
        match &self.out {
            Some(path) => std::fs::write(path, text).map_err(|e| usage("out", format!("{}: {e}", path.display()))),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

fn read_matrix(path: &Path, flag: &'static str) -> CliResult<sparsedag::Matrix> {
    read_matrix_file(path).map_err(|e| usage(flag, e))
}

fn read_sigma(path: &Path) -> CliResult<CovarianceMatrix> {
    Ok(CovarianceMatrix::new(read_matrix(path, "sigma")?)?)
}

fn read_data(path: &Path) -> CliResult<DataMatrix> {
    DataMatrix::new(read_matrix(path, "data")?).map_err(|e| usage("data", e))
}

fn family(f: Family) -> PenaltyFamily {
    match f {
        Family::Mcp => PenaltyFamily::Mcp,
        Family::Scad => PenaltyFamily::Scad,
        Family::L1 => PenaltyFamily::L1,
        Family::L0 => PenaltyFamily::L0,
        Family::CappedL1 => PenaltyFamily::CappedL1,
    }
}

fn penalty_spec(f: Family, lambda: f64, gamma: Option<f64>) -> CliResult<PenaltySpec> {
    let fam = family(f);
    if fam.needs_gamma() && gamma.is_none() {
        return Err(usage("gamma", format!("required for the {fam} penalty")));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(usage("lambda", format!("{lambda} must be a finite nonnegative number")));
    }
    PenaltySpec::new(fam, lambda, if fam.needs_gamma() { gamma } else { None }).map_err(|e| usage("gamma", e))
}

fn parse_permutation(text: &str, p: usize, flag: &'static str) -> CliResult<Permutation> {
    let mapping = text
        .split(',')
        .map(|t| t.trim().parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| usage(flag, format!("'{text}': {e}")))?;
    if mapping.len() != p {
        return Err(usage(
            flag,
            format!("'{text}' has {} entries, expected {p}", mapping.len()),
        ));
    }
    Permutation::new(mapping).map_err(|e| usage(flag, e))
}

fn solve_mode(solver: SolverArg, restarts: usize, seed: u64) -> CliResult<SolveMode> {
    match solver {
        SolverArg::Exact => Ok(SolveMode::Exact),
        SolverArg::Cd if restarts == 0 => Err(usage("restarts", "must be at least 1")),
        SolverArg::Cd => Ok(SolveMode::CoordinateDescent { restarts, seed }),
    }
}

pub fn fit(args: &FitArgs, ctx: &Context) -> CliResult<()> {
    let x = read_data(&args.data)?;
    let pen = penalty_spec(args.penalty.penalty, args.penalty.lambda, args.penalty.gamma)?;
    let mut result = match args.mode {
        FitModeArg::Dp => global_minimizer_dp(&x, &pen)?,
        FitModeArg::Exhaustive => exhaustive_global(&x, &pen)?,
        FitModeArg::Restricted => {
            let text = args
                .permutation
                .as_deref()
                .ok_or_else(|| usage("permutation", "required with --mode restricted"))?;
            let perm = parse_permutation(text, x.p(), "permutation")?;
            let mode = solve_mode(args.solver, args.restarts, ctx.seed)?;
            restricted_minimizer(&x, &perm, &pen, mode)?
        }
    };
    result.est_permutations = estimated_permutations(&result.b_hat, args.max_permutations);
    ctx.write(&to_json_string(&FitJson::from(&result))?)
}

#[derive(Serialize)]
struct ClassMemberJson {
    permutation: Vec<usize>,
    multiplicity: u64,
    edges: Vec<EdgeJson>,
    variances: Vec<f64>,
}

#[derive(Serialize)]
struct ClassJson {
    p: usize,
    exact: bool,
    permutations_examined: u64,
    d_sigma: usize,
    betamin_sigma: Option<f64>,
    sigma_max_sq: f64,
    members: Vec<ClassMemberJson>,
}

fn enumeration_mode(p: usize, samples: usize, seed: u64) -> CliResult<EnumerationMode> {
    if samples == 0 {
        return Err(usage("samples", "must be at least 1"));
    }
    Ok(EnumerationMode::auto(p, samples, seed))
}

pub fn enumerate_class(args: &ClassArgs, ctx: &Context) -> CliResult<()> {
    let sigma = read_sigma(&args.sigma)?;
    let summary = class_summary(&sigma, &enumeration_mode(sigma.p(), args.samples, ctx.seed)?)?;
    let out = ClassJson {
        p: sigma.p(),
        exact: summary.exact,
        permutations_examined: summary.permutations_examined as u64,
        d_sigma: summary.d_sigma,
        betamin_sigma: summary.betamin_sigma,
        sigma_max_sq: summary.sigma_max_sq,
        members: summary
            .dags
            .iter()
            .map(|m| ClassMemberJson {
                permutation: m.permutation.as_slice().to_vec(),
                multiplicity: m.multiplicity,
                edges: DagJson::new(&m.dag, None, None).edges,
                variances: m.variances.values().to_vec(),
            })
            .collect(),
    };
    ctx.write(&to_json_string(&out)?)
}

#[derive(Serialize)]
struct MinTraceJson {
    p: usize,
    permutation: Vec<usize>,
    trace: f64,
    unique: bool,
    runner_up_trace: Option<f64>,
    exact: bool,
    permutations_examined: u64,
    edges: Vec<EdgeJson>,
    variances: Vec<f64>,
}

pub fn mintrace(args: &ClassArgs, ctx: &Context) -> CliResult<()> {
    let sigma = read_sigma(&args.sigma)?;
    let mt = min_trace_permutation(&sigma, &enumeration_mode(sigma.p(), args.samples, ctx.seed)?)?;
    let out = MinTraceJson {
        p: sigma.p(),
        permutation: mt.permutation.as_slice().to_vec(),
        trace: mt.trace,
        unique: mt.unique,
        runner_up_trace: mt.runner_up_trace,
        exact: mt.exact,
        permutations_examined: mt.permutations_examined as u64,
        edges: DagJson::new(&mt.dag, None, None).edges,
        variances: mt.variances.values().to_vec(),
    };
    ctx.write(&to_json_string(&out)?)
}

fn scan_orderings(args: &CiArgs, p: usize, seed: u64) -> CliResult<Vec<Permutation>> {
    if let Some(text) = &args.permutations {
        return text
            .split(';')
            .filter(|t| !t.trim().is_empty())
            .map(|t| parse_permutation(t, p, "permutations"))
            .collect();
    }
    if let Some(k) = args.samples {
        if k == 0 {
            return Err(usage("samples", "must be at least 1"));
        }
        return Ok(random_permutations(p, k, seed));
    }
    if p > sparsedag::equivalence::PERMUTATION_CAP {
        return Err(usage(
            "samples",
            format!("p = {p} has too many orderings to scan them all; pass --samples or --permutations"),
        ));
    }
    Ok(Permutation::all(p).collect())
}

pub fn ci_scan(args: &CiArgs, ctx: &Context) -> CliResult<()> {
    let set = if let Some(path) = &args.sigma {
        let sigma = read_sigma(path)?;
        let perms = scan_orderings(args, sigma.p(), ctx.seed)?;
        union_ci_population(&sigma, &perms)?
    } else {
        let path = args.data.as_ref().expect("clap requires --sigma or --data");
        let x = read_data(path)?;
        let pa = &args.penalty;
        let fam = pa.penalty.ok_or_else(|| usage("penalty", "required with --data"))?;
        let lambda = pa.lambda.ok_or_else(|| usage("lambda", "required with --data"))?;
        let pen = penalty_spec(fam, lambda, pa.gamma)?;
        let perms = scan_orderings(args, x.p(), ctx.seed)?;
        union_ci_sample(&x, &perms, &pen, solve_mode(args.solver, args.restarts, ctx.seed)?)?
    };
    let mut text = String::new();
    for rel in &set {
        text.push_str(&to_json_line(rel)?);
        text.push('\n');
    }
    ctx.write(&text)
}

/// One row of the per-replicate CSV.
#[derive(Serialize)]
struct ReplicateRow {
    n: usize,
    lambda: f64,
    replicate: usize,
    support_recovered: bool,
    hamming: usize,
    l1_err: f64,
    l2_err: f64,
    objective: f64,
    tr_omega_hat: f64,
    true_edges: usize,
    estimated_edges: usize,
}

fn load_config(path: &Path) -> CliResult<SimConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| usage("config", format!("{}: {e}", path.display())))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let config: SimConfig = if is_json {
        serde_json::from_str(&text).map_err(|e| usage("config", e))?
    } else {
        toml::from_str(&text).map_err(|e| usage("config", e))?
    };
    Ok(config)
}

fn write_rows(path: &Path, reports: &[ExperimentReport]) -> CliResult<()> {
    let bad = |e: csv::Error| usage("csv", format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(bad)?;
    for rep in reports {
        for r in &rep.records {
            w.serialize(ReplicateRow {
                n: rep.config.n,
                lambda: rep.lambda,
                replicate: r.replicate,
                support_recovered: r.support_recovered,
                hamming: r.hamming,
                l1_err: r.l1_err,
                l2_err: r.l2_err,
                objective: r.objective,
                tr_omega_hat: r.tr_omega_hat,
                true_edges: r.true_edges,
                estimated_edges: r.estimated_edges,
            })
            .map_err(bad)?;
        }
    }
    w.flush().map_err(|e| usage("csv", e))
}

pub fn simulate(args: &SimulateArgs, ctx: &Context) -> CliResult<()> {
    let mut config = load_config(&args.config)?;
    if ctx.seed_given {
        config.seed = ctx.seed;
    }
    config.validate().map_err(|e| match e {
        Error::InvalidConfig(_) | Error::InvalidPenalty(_) => usage("config", e),
        other => CliError::Compute(other),
    })?;
    let csv_path = args
        .csv
        .clone()
        .or_else(|| ctx.out.as_ref().map(|o| o.with_extension("csv")));
    let (json, reports) = match &args.ns {
        None => {
            let rep = run_experiment(&config)?;
            (to_json_string(&rep)?, vec![rep])
        }
        Some(text) => {
            let ns = text
                .split(',')
                .map(|t| t.trim().parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| usage("ns", format!("'{text}': {e}")))?;
            if ns.contains(&0) {
                return Err(usage("ns", "sample sizes must be positive"));
            }
            let sweep = sweep_n(&config, &ns)?;
            (to_json_string(&sweep)?, sweep.reports)
        }
    };
    ctx.write(&json)?;
    if let Some(path) = csv_path {
        write_rows(&path, &reports)?;
    }
    Ok(())
}

pub fn diagnose(args: &DiagnoseArgs, ctx: &Context) -> CliResult<()> {
    let sigma = read_sigma(&args.sigma)?;
    let pen = penalty_spec(args.penalty.penalty, args.penalty.lambda, args.penalty.gamma)?;
    if args.n < 2 {
        return Err(usage("n", "must be at least 2"));
    }
    if !(args.delta > 0.0 && args.delta < 1.0) {
        return Err(usage("delta", "must lie in (0, 1)"));
    }
    if !(args.xi >= 0.0 && args.xi.is_finite()) {
        return Err(usage("xi", "must be finite and nonnegative"));
    }
    for (flag, v) in [
        ("re-directions", args.re_directions),
        ("gw-directions", args.gw_directions),
        ("samples", args.samples),
    ] {
        if v == 0 {
            return Err(usage(flag, "must be at least 1"));
        }
    }
    let opts = ConditionOptions {
        delta: args.delta,
        xi: args.xi,
        re_directions: args.re_directions,
        gw_directions: args.gw_directions,
        samples: args.samples,
    };
    let report = condition_report(&sigma, &pen, args.n, ctx.seed, &opts)?;
    ctx.write(&to_json_string(&report)?)
}
