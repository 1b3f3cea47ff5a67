use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "sparsedag",
    version,
    about = "Penalized least-squares learning of sparse Gaussian DAGs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Seed for every random choice (default 0).
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Maximum number of worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a DAG to a data matrix (rows are samples, columns are nodes).
    Fit(FitArgs),
    /// List the DAGs B(π) obtained from a covariance matrix.
    EnumerateClass(ClassArgs),
    /// Find the ordering with the smallest total residual variance.
    Mintrace(ClassArgs),
    /// Scan for conditional independences, one JSON object per line.
    CiScan(CiArgs),
    /// Run a simulation experiment described by a TOML or JSON file.
    Simulate(SimulateArgs),
    /// Report the quantities the recovery guarantees depend on.
    Diagnose(DiagnoseArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    Mcp,
    Scad,
    L1,
    L0,
    CappedL1,
}

#[derive(Debug, Args)]
pub struct PenaltyArgs {
    /// Penalty family.
    #[arg(long)]
    pub penalty: Family,
    /// Penalty strength λ.
    #[arg(long)]
    pub lambda: f64,
    /// Shape parameter γ (MCP, SCAD, capped-l1).
    #[arg(long)]
    pub gamma: Option<f64>,
}

/// Same flags as `PenaltyArgs` but optional, for commands where a penalty
/// is only needed in some modes.
#[derive(Debug, Args)]
pub struct OptionalPenaltyArgs {
    #[arg(long)]
    pub penalty: Option<Family>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitModeArg {
    /// Global minimiser by dynamic programming over orderings.
    Dp,
    /// Minimiser restricted to one ordering (needs --permutation).
    Restricted,
    /// Brute force over every DAG (p <= 4).
    Exhaustive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverArg {
    Exact,
    Cd,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Data matrix CSV.
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub penalty: PenaltyArgs,
    #[arg(long, value_enum, default_value_t = FitModeArg::Dp)]
    pub mode: FitModeArg,
    /// Comma-separated ordering, sinks first (restricted mode).
    #[arg(long)]
    pub permutation: Option<String>,
    /// Neighbourhood solver for restricted mode.
    #[arg(long, value_enum, default_value_t = SolverArg::Exact)]
    pub solver: SolverArg,
    /// Starting points for the coordinate-descent solver.
    #[arg(long, default_value_t = 5)]
    pub restarts: usize,
    /// Most consistent orderings listed in the output.
    #[arg(long, default_value_t = 1000)]
    pub max_permutations: usize,
}

#[derive(Debug, Args)]
pub struct ClassArgs {
    /// Covariance matrix CSV.
    #[arg(long)]
    pub sigma: PathBuf,
    /// Orderings sampled when p is too large to enumerate.
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
}

#[derive(Debug, Args)]
pub struct CiArgs {
    /// Covariance matrix CSV (population mode).
    #[arg(long, conflicts_with = "data", required_unless_present = "data")]
    pub sigma: Option<PathBuf>,
    /// Data matrix CSV (sample mode; needs a penalty).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Orderings to scan, separated by ';' (each comma-separated). All
    /// orderings when omitted.
    #[arg(long, conflicts_with = "samples")]
    pub permutations: Option<String>,
    /// Scan this many random orderings instead of all of them.
    #[arg(long)]
    pub samples: Option<usize>,
    #[command(flatten)]
    pub penalty: OptionalPenaltyArgs,
    #[arg(long, value_enum, default_value_t = SolverArg::Exact)]
    pub solver: SolverArg,
    #[arg(long, default_value_t = 5)]
    pub restarts: usize,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Experiment configuration (.json, otherwise TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Comma-separated sample sizes; runs the experiment once per size.
    #[arg(long)]
    pub ns: Option<String>,
    /// Per-replicate CSV; defaults to the --out path with a .csv extension.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    /// Covariance matrix CSV.
    #[arg(long)]
    pub sigma: PathBuf,
    #[command(flatten)]
    pub penalty: PenaltyArgs,
    /// Sample size the report is made for.
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0.5)]
    pub delta: f64,
    #[arg(long, default_value_t = 3.0)]
    pub xi: f64,
    #[arg(long, default_value_t = 10_000)]
    pub re_directions: usize,
    #[arg(long, default_value_t = 200)]
    pub gw_directions: usize,
    #[arg(long, default_value_t = 2000)]
    pub samples: usize,
}
