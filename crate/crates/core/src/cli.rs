//! Command-line experiment runner.
//!
//! Exit codes: 0 when every run converged, 2 when a run finished without
//! converging (or failed inside a sweep), 1 on usage or input errors.

use std::ffi::OsString;
use std::fmt;
use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::newton::ReferenceMetrics;
use crate::problems::{
    blob_pair, bump_pair_1d, gaussian_pair_2d, image_histogram, load_histogram_csv, load_image_pgm, median_cost_scale,
    squared_euclidean_cost, GridSpec,
};
use crate::record::{ConvergenceRecord, CSV_HEADER};
use crate::solver::{solve, Solution};
use crate::transport::{gibbs_kernel, CostMatrix, Histogram, SolveConfig, SolverKind};

pub const EXIT_CONVERGED: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;

/// Default output directory when `--out-dir` is not given.
pub const OUT_DIR_ENV: &str = "SINKHORN_NEWTON_OUT_DIR";

const SUMMARY_HEADER: &str =
    "label,solver,n,epsilon,gamma,outer_iters,total_cg_iters,final_violation,wall_time_s,converged,error";

#[derive(Debug, Parser)]
#[command(
    name = "sinkhorn-newton",
    version,
    about = "Entropic optimal transport solvers and benchmarks"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one solver on one instance and write its convergence log.
    #[command(args_override_self = true)]
    Solve(SolveArgs),
    /// Run Sinkhorn and Newton on the same instance; Newton is counted in CG iterations.
    #[command(args_override_self = true)]
    Compare(CompareArgs),
    /// One run per (epsilon factor, offset) pair, epsilon = factor * median cost.
    #[command(name = "sweep-eps", args_override_self = true)]
    SweepEps(SweepEpsArgs),
    /// One run per mesh size.
    #[command(name = "sweep-mesh", args_override_self = true)]
    SweepMesh(SweepMeshArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ProblemKind {
    /// Two Gaussian bumps on a 2-D grid (--grid).
    Gauss2d,
    /// Bumps on a 1-D grid (--n).
    Bump1d,
    /// Synthetic 28x28 blob images (--seed, --gamma).
    Blobs,
    /// A pair of PGM images (--image-a, --image-b, --gamma).
    Images,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum CostSpec {
    Grid1d(usize),
    Grid2d(usize),
}

impl FromStr for CostSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (kind, size) = s
            .split_once(':')
            .ok_or_else(|| format!("expected grid1d:N or grid2d:K, got {s:?}"))?;
        let size: usize = size.parse().map_err(|_| format!("bad grid size {size:?}"))?;
        match kind {
            "grid1d" => Ok(CostSpec::Grid1d(size)),
            "grid2d" => Ok(CostSpec::Grid2d(size)),
            _ => Err(format!("unknown cost kind {kind:?}, expected grid1d or grid2d")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum CgMax {
    Auto,
    Fixed(usize),
}

impl FromStr for CgMax {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "auto" => Ok(CgMax::Auto),
            _ => s
                .parse()
                .map(CgMax::Fixed)
                .map_err(|_| format!("expected a positive integer or 'auto', got {s:?}")),
        }
    }
}

#[derive(Clone, Debug, Args)]
struct InstanceArgs {
    /// Built-in problem family.
    #[arg(long, value_enum)]
    problem: Option<ProblemKind>,
    /// Points per axis for gauss2d.
    #[arg(long, default_value_t = 20)]
    grid: usize,
    /// Grid size for bump1d.
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Seed for blobs; the pair uses seed and seed + 1.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Offset added to image intensities before normalizing.
    #[arg(long, default_value_t = 0.1)]
    gamma: f64,
    #[arg(long)]
    image_a: Option<PathBuf>,
    #[arg(long)]
    image_b: Option<PathBuf>,
    /// Source histogram, one value per line.
    #[arg(long)]
    a: Option<PathBuf>,
    /// Target histogram, one value per line.
    #[arg(long)]
    b: Option<PathBuf>,
    /// Cost for --a/--b: grid1d:N or grid2d:K (squared Euclidean on [0,1]^d).
    #[arg(long)]
    cost: Option<CostSpec>,
}

#[derive(Clone, Debug, Args)]
struct SolverArgs {
    #[arg(long)]
    epsilon: Option<f64>,
    /// Set epsilon to this multiple of the median cost entry.
    #[arg(long, conflicts_with = "epsilon")]
    eps_median_factor: Option<f64>,
    /// sinkhorn, newton_primal (alias newton) or newton_dual.
    #[arg(long, default_value = "newton_primal")]
    solver: SolverKind,
    /// Stop once the marginal violation is below this.
    #[arg(long, default_value_t = 1e-13)]
    tol: f64,
    #[arg(long, default_value_t = 1e-13)]
    cg_tol: f64,
    /// CG iteration cap, or 'auto' for ceil(n/12) on 1-D grids.
    #[arg(long, default_value = "34")]
    cg_max: CgMax,
    /// Outer iteration cap (default 500 for Newton, 200000 for Sinkhorn).
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long, default_value_t = 50.0)]
    max_step_ratio: f64,
    /// Solve once for a reference plan and log cost and plan errors against it.
    #[arg(long)]
    reference: bool,
}

#[derive(Clone, Debug, Args)]
struct OutputArgs {
    /// key=value file with defaults for any long flag; flags on the command line win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; defaults to stdout, or a file in --out-dir.
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, env = OUT_DIR_ENV)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct SweepEpsArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    output: OutputArgs,
    /// Comma-separated multiples of the median cost.
    #[arg(long, value_delimiter = ',', required = true)]
    factors: Vec<f64>,
    /// Comma-separated offsets; defaults to --gamma.
    #[arg(long, value_delimiter = ',')]
    gammas: Vec<f64>,
    #[command(flatten)]
    sweep: SweepArgs,
}

#[derive(Debug, Args)]
struct SweepMeshArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    output: OutputArgs,
    /// Comma-separated sizes: n for bump1d, points per axis for gauss2d.
    #[arg(long, value_delimiter = ',', required = true)]
    sizes: Vec<usize>,
    #[command(flatten)]
    sweep: SweepArgs,
}

#[derive(Clone, Debug, Args)]
struct SweepArgs {
    /// Parallel runs.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Also write every run's convergence log, prefixed by its label.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Run(Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage: {msg}"),
            CliError::Run(err) => write!(f, "{err}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        CliError::Run(err)
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn io_error(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| {
        CliError::Run(Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match expand_config(args) {
        Ok(args) => args,
        Err(err) => {
            eprintln!("error: {err}");
            return EXIT_ERROR;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() { EXIT_ERROR } else { EXIT_CONVERGED };
        }
    };
    let outcome = match cli.command {
        Command::Solve(args) => cmd_solve(&args),
        Command::Compare(args) => cmd_compare(&args),
        Command::SweepEps(args) => cmd_sweep_eps(&args),
        Command::SweepMesh(args) => cmd_sweep_mesh(&args),
    };
    match outcome {
        Ok(true) => EXIT_CONVERGED,
        Ok(false) => EXIT_NOT_CONVERGED,
        Err(err) => {
            eprintln!("error: {err}");
            EXIT_ERROR
        }
    }
}

/// Splices the `--config` file's entries in right after the subcommand so
/// that later command-line flags override them.
fn expand_config(args: Vec<OsString>) -> CliResult<Vec<OsString>> {
    let mut config = None;
    for (i, arg) in args.iter().enumerate() {
        let arg = arg.to_string_lossy();
        if arg == "--config" {
            let path = args.get(i + 1).ok_or_else(|| usage("--config needs a file"))?;
            config = Some(PathBuf::from(path));
        } else if let Some(path) = arg.strip_prefix("--config=") {
            config = Some(PathBuf::from(path));
        }
    }
    let Some(path) = config else {
        return Ok(args);
    };
    let Some(sub) = args
        .iter()
        .position(|a| matches!(a.to_str(), Some("solve" | "compare" | "sweep-eps" | "sweep-mesh")))
    else {
        return Ok(args);
    };
    let text = fs::read_to_string(&path).map_err(io_error(&path))?;
    let extra = parse_config(&text, &path)?;
    let mut out = args[..=sub].to_vec();
    out.extend(extra.into_iter().map(OsString::from));
    out.extend_from_slice(&args[sub + 1..]);
    Ok(out)
}

fn parse_config(text: &str, path: &Path) -> Result<Vec<String>> {
    let mut tokens = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            message: format!("expected key=value, got {line:?}"),
        })?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if key == "config" {
            continue;
        }
        match value {
            "true" => tokens.push(format!("--{key}")),
            "false" => {}
            _ => tokens.push(format!("--{key}={value}")),
        }
    }
    Ok(tokens)
}

struct Instance {
    a: Histogram,
    b: Histogram,
    cost: CostMatrix,
    /// Set for 1-D meshes, the only case where `--cg-max auto` is defined.
    one_dimensional: bool,
}

fn build_instance(args: &InstanceArgs) -> CliResult<Instance> {
    let from_files = args.a.is_some() || args.b.is_some();
    match (args.problem, from_files) {
        (Some(_), true) => Err(usage("--problem cannot be combined with --a/--b")),
        (None, false) => Err(usage("give either --problem or --a/--b with --cost")),
        (None, true) => {
            let (Some(pa), Some(pb)) = (&args.a, &args.b) else {
                return Err(usage("--a and --b must be given together"));
            };
            let spec = args
                .cost
                .ok_or_else(|| usage("--a/--b need --cost grid1d:N or grid2d:K"))?;
            let a = load_histogram_csv(pa)?;
            let b = load_histogram_csv(pb)?;
            for (path, h) in [(pa, &a), (pb, &b)] {
                if h.renormalized {
                    eprintln!("note: {} did not sum to 1 and was renormalized", path.display());
                }
            }
            let grid = match spec {
                CostSpec::Grid1d(n) => GridSpec::line(n)?,
                CostSpec::Grid2d(k) => GridSpec::square(k)?,
            };
            if a.histogram.len() != grid.len() || b.histogram.len() != grid.len() {
                return Err(usage(format!(
                    "histogram lengths ({}, {}) do not match the {} grid points of --cost",
                    a.histogram.len(),
                    b.histogram.len(),
                    grid.len()
                )));
            }
            Ok(Instance {
                a: a.histogram,
                b: b.histogram,
                cost: squared_euclidean_cost(&grid, &grid)?,
                one_dimensional: grid.dimension() == 1,
            })
        }
        (Some(kind), false) => {
            let (a, b, grid) = match kind {
                ProblemKind::Gauss2d => gaussian_pair_2d(args.grid)?,
                ProblemKind::Bump1d => bump_pair_1d(args.n)?,
                ProblemKind::Blobs => blob_pair(args.seed, args.gamma)?,
                ProblemKind::Images => {
                    let (Some(pa), Some(pb)) = (&args.image_a, &args.image_b) else {
                        return Err(usage("--problem images needs --image-a and --image-b"));
                    };
                    let ia = load_image_pgm(pa)?;
                    let ib = load_image_pgm(pb)?;
                    let (h, w) = ia.dim();
                    if ib.dim() != (h, w) || h != w {
                        return Err(CliError::Run(Error::Unsupported(format!(
                            "images must be square and of equal size, got {:?} and {:?}",
                            ia.dim(),
                            ib.dim()
                        ))));
                    }
                    (
                        image_histogram(&ia, args.gamma)?,
                        image_histogram(&ib, args.gamma)?,
                        GridSpec::square(h)?,
                    )
                }
            };
            Ok(Instance {
                a,
                b,
                cost: squared_euclidean_cost(&grid, &grid)?,
                one_dimensional: grid.dimension() == 1,
            })
        }
    }
}

fn epsilon_for(args: &SolverArgs, cost: &CostMatrix) -> CliResult<f64> {
    match (args.epsilon, args.eps_median_factor) {
        (Some(eps), _) => Ok(eps),
        (None, Some(factor)) => Ok(factor * median_cost_scale(cost)?),
        (None, None) => Err(usage("give --epsilon or --eps-median-factor")),
    }
}

fn solve_config(args: &SolverArgs, kind: SolverKind, epsilon: f64, instance: &Instance) -> CliResult<SolveConfig> {
    let mut config = SolveConfig::new(epsilon, kind);
    config.outer_tol = args.tol;
    config.cg_tol = args.cg_tol;
    config.max_step_ratio = args.max_step_ratio;
    if let Some(cap) = args.max_iter {
        config.max_outer_iters = cap;
    }
    config.cg_max_iters = match args.cg_max {
        CgMax::Fixed(cap) => cap,
        CgMax::Auto if instance.one_dimensional => instance.a.len().div_ceil(12),
        CgMax::Auto => {
            return Err(CliError::Run(Error::InvalidConfig(
                "--cg-max auto is only defined for 1-D meshes".into(),
            )))
        }
    };
    config.validate()?;
    Ok(config)
}

/// Solves `instance`; with `reference` set, first solves with Newton for `P*`
/// and then logs errors against it.
fn run_instance(instance: &Instance, config: &SolveConfig, reference: bool) -> Result<Solution> {
    let kernel = gibbs_kernel(&instance.cost, config.epsilon)?;
    if !reference {
        return solve(&kernel, &instance.a, &instance.b, config, None);
    }
    let mut ref_config = config.clone();
    ref_config.solver_kind = SolverKind::NewtonPrimal;
    ref_config.max_outer_iters = SolveConfig::new(config.epsilon, SolverKind::NewtonPrimal).max_outer_iters;
    let star = solve(&kernel, &instance.a, &instance.b, &ref_config, None)?;
    if !star.converged() {
        eprintln!("warning: reference solve did not converge; errors are relative to its last iterate");
    }
    let metrics = ReferenceMetrics {
        cost: &instance.cost,
        reference: &star.plan,
    };
    solve(&kernel, &instance.a, &instance.b, config, Some(metrics))
}

fn open_output(output: &OutputArgs, default_name: &str) -> CliResult<Box<dyn Write>> {
    let path = match (&output.output, &output.out_dir) {
        (Some(path), _) => path.clone(),
        (None, Some(dir)) => {
            fs::create_dir_all(dir).map_err(io_error(dir))?;
            dir.join(default_name)
        }
        (None, None) => return Ok(Box::new(io::stdout().lock())),
    };
    let file = File::create(&path).map_err(io_error(&path))?;
    Ok(Box::new(io::BufWriter::new(file)))
}

fn cmd_solve(args: &SolveArgs) -> CliResult<bool> {
    let instance = build_instance(&args.instance)?;
    let epsilon = epsilon_for(&args.solver, &instance.cost)?;
    let config = solve_config(&args.solver, args.solver.solver, epsilon, &instance)?;
    let solution = run_instance(&instance, &config, args.solver.reference)?;
    let out = open_output(&args.output, "solve.csv")?;
    solution.record.write_csv(out)?;
    Ok(solution.converged())
}

fn write_labeled_rows<W: Write>(csv: &mut csv::Writer<W>, label: &str, record: &ConvergenceRecord) -> Result<()> {
    for r in &record.rows {
        csv.serialize((
            label,
            r.outer_iter,
            r.cum_cg_iters,
            r.wall_time_s,
            r.violation_inf,
            r.cost_error,
            r.plan_error_l1,
        ))?;
    }
    Ok(())
}

fn cmd_compare(args: &CompareArgs) -> CliResult<bool> {
    let instance = build_instance(&args.instance)?;
    let epsilon = epsilon_for(&args.solver, &instance.cost)?;
    let newton_kind = match args.solver.solver {
        SolverKind::Sinkhorn => SolverKind::NewtonPrimal,
        kind => kind,
    };
    let mut sink_config = solve_config(&args.solver, SolverKind::Sinkhorn, epsilon, &instance)?;
    if args.solver.max_iter.is_none() {
        sink_config.max_outer_iters = SolveConfig::new(epsilon, SolverKind::Sinkhorn).max_outer_iters;
    }
    let newton_config = solve_config(&args.solver, newton_kind, epsilon, &instance)?;
    let sinkhorn = run_instance(&instance, &sink_config, args.solver.reference)?;
    let newton = run_instance(&instance, &newton_config, args.solver.reference)?;

    let out = open_output(&args.output, "compare.csv")?;
    let mut csv = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    csv.write_record(std::iter::once("solver").chain(CSV_HEADER.split(',')))
        .map_err(Error::from)?;
    write_labeled_rows(&mut csv, SolverKind::Sinkhorn.as_str(), &sinkhorn.record)?;
    write_labeled_rows(&mut csv, newton_kind.as_str(), &newton.record)?;
    csv.flush().map_err(|e| Error::from(csv::Error::from(e)))?;
    Ok(sinkhorn.converged() && newton.converged())
}

struct SweepJob {
    label: String,
    instance: InstanceArgs,
    epsilon: EpsilonChoice,
    gamma: f64,
}

#[derive(Clone, Copy)]
enum EpsilonChoice {
    Fixed(f64),
    MedianFactor(f64),
}

struct SweepResult {
    label: String,
    n: usize,
    epsilon: Option<f64>,
    gamma: f64,
    outcome: std::result::Result<Solution, String>,
}

fn run_job(job: &SweepJob, solver: &SolverArgs) -> SweepResult {
    let mut result = SweepResult {
        label: job.label.clone(),
        n: 0,
        epsilon: None,
        gamma: job.gamma,
        outcome: Err(String::new()),
    };
    let mut attempt = || -> CliResult<Solution> {
        let instance = build_instance(&job.instance)?;
        result.n = instance.a.len();
        let epsilon = match job.epsilon {
            EpsilonChoice::Fixed(eps) => eps,
            EpsilonChoice::MedianFactor(f) => f * median_cost_scale(&instance.cost)?,
        };
        result.epsilon = Some(epsilon);
        let config = solve_config(solver, solver.solver, epsilon, &instance)?;
        Ok(run_instance(&instance, &config, solver.reference)?)
    };
    let outcome = attempt().map_err(|e| e.to_string());
    result.outcome = outcome;
    result
}

fn run_sweep(jobs: Vec<SweepJob>, solver: &SolverArgs, output: &OutputArgs, sweep: &SweepArgs) -> CliResult<bool> {
    if sweep.jobs == 0 {
        return Err(usage("--jobs must be at least 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(sweep.jobs)
        .build()
        .map_err(|e| usage(format!("cannot start {} workers: {e}", sweep.jobs)))?;
    let results: Vec<SweepResult> = pool.install(|| jobs.par_iter().map(|job| run_job(job, solver)).collect());

    let out = open_output(output, "sweep.csv")?;
    let mut csv = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    csv.write_record(SUMMARY_HEADER.split(',')).map_err(Error::from)?;
    let mut all_converged = true;
    for r in &results {
        let (stats, error) = match &r.outcome {
            Ok(sol) => (
                Some((
                    sol.record.iterations(),
                    sol.record.total_cg_iters(),
                    sol.record.final_violation(),
                    sol.record.wall_time_s(),
                    sol.converged(),
                )),
                String::new(),
            ),
            Err(msg) => (None, msg.clone()),
        };
        all_converged &= stats.is_some_and(|s| s.4);
        csv.serialize((
            &r.label,
            solver.solver.as_str(),
            r.n,
            r.epsilon,
            r.gamma,
            stats.map(|s| s.0),
            stats.map(|s| s.1),
            stats.and_then(|s| s.2),
            stats.map(|s| s.3),
            stats.is_some_and(|s| s.4),
            error,
        ))
        .map_err(Error::from)?;
    }
    csv.flush().map_err(|e| Error::from(csv::Error::from(e)))?;

    if let Some(path) = &sweep.trace {
        let file = File::create(path).map_err(io_error(path))?;
        let mut csv = csv::WriterBuilder::new().has_headers(false).from_writer(file);
        csv.write_record(std::iter::once("label").chain(CSV_HEADER.split(',')))
            .map_err(Error::from)?;
        for r in &results {
            if let Ok(sol) = &r.outcome {
                write_labeled_rows(&mut csv, &r.label, &sol.record)?;
            }
        }
        csv.flush().map_err(|e| Error::from(csv::Error::from(e)))?;
    }
    Ok(all_converged)
}

fn cmd_sweep_eps(args: &SweepEpsArgs) -> CliResult<bool> {
    if args.factors.is_empty() {
        return Err(usage("--factors needs at least one value"));
    }
    if args.solver.epsilon.is_some() || args.solver.eps_median_factor.is_some() {
        return Err(usage(
            "sweep-eps sets epsilon from --factors; drop --epsilon/--eps-median-factor",
        ));
    }
    let gammas = if args.gammas.is_empty() {
        vec![args.instance.gamma]
    } else {
        args.gammas.clone()
    };
    let mut jobs = Vec::new();
    for &gamma in &gammas {
        for &factor in &args.factors {
            let mut instance = args.instance.clone();
            instance.gamma = gamma;
            jobs.push(SweepJob {
                label: format!("gamma={gamma};factor={factor}"),
                instance,
                epsilon: EpsilonChoice::MedianFactor(factor),
                gamma,
            });
        }
    }
    run_sweep(jobs, &args.solver, &args.output, &args.sweep)
}

fn cmd_sweep_mesh(args: &SweepMeshArgs) -> CliResult<bool> {
    if args.sizes.is_empty() {
        return Err(usage("--sizes needs at least one value"));
    }
    let epsilon = match (args.solver.epsilon, args.solver.eps_median_factor) {
        (Some(eps), _) => EpsilonChoice::Fixed(eps),
        (None, Some(f)) => EpsilonChoice::MedianFactor(f),
        (None, None) => return Err(usage("give --epsilon or --eps-median-factor")),
    };
    let kind = args.instance.problem.unwrap_or(ProblemKind::Bump1d);
    let jobs = args
        .sizes
        .iter()
        .map(|&size| {
            let mut instance = args.instance.clone();
            instance.problem = Some(kind);
            match kind {
                ProblemKind::Bump1d => instance.n = size,
                ProblemKind::Gauss2d => instance.grid = size,
                _ => return Err(usage("sweep-mesh supports --problem bump1d or gauss2d")),
            }
            Ok(SweepJob {
                label: format!("n={size}"),
                instance,
                epsilon,
                gamma: args.instance.gamma,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    run_sweep(jobs, &args.solver, &args.output, &args.sweep)
}
