//! Command-line interface.
//!
//! Exit codes: 0 success, 2 usage or malformed-input errors, 3 failed
//! sampling-validity check without `--force`, 1 runtime failures.

use crate::experiments::{run_experiment, ExperimentName, ExperimentOverrides, PortfolioCsv};
use crate::report::{DiagnosticsReport, RunSummary};
use crate::spec::{apply_smoothness_choice, resolve_problem, resolve_sketch, BuiltinParams, SpecError};
use clap::{Args, Parser, Subcommand};
use sketch_descent::solvers::{Algorithm, SolverConfig};
use std::path::PathBuf;

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_ASSUMPTION: i32 = 3;

#[derive(Parser)]
#[command(
    name = "sketchdesc",
    about = "Randomized sketch descent for linearly constrained smooth optimization",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Run one solver on one problem and write trace/diagnostics/summary.
    Solve(SolveArgs),
    /// Compute sampling-validity diagnostics and rate constants.
    Diagnose(DiagnoseArgs),
    /// Run a benchmark experiment grid.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
pub struct ProblemArgs {
    /// Problem: a JSON file path or builtin:{exp1-structured, exp1-random,
    /// exp2, pagerank-demo, dual-ridge-synth, portfolio-synth}.
    #[arg(long)]
    pub problem: String,
    /// Dimension for builtin problems.
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    /// δ parameter for the builtin quadratics.
    #[arg(long, default_value_t = 0.01)]
    pub delta: f64,
    /// Seed for builtin data generation (independent of the run seed).
    #[arg(long, default_value_t = 7)]
    pub data_seed: u64,
    /// Sketch kind: fixed-pairs, fixed-pairs-uniform, random-pairs,
    /// random-tuples, lipschitz-pairs, kernel-blocks, gaussian, uniform.
    #[arg(long)]
    pub sketch: String,
    /// Sketch width for the kinds that need one.
    #[arg(long)]
    pub p: Option<usize>,
    /// Curvature bound: full, scaled-identity, per-sketch.
    #[arg(long, default_value = "full")]
    pub smoothness: String,
    /// Monte-Carlo sample count for diagnostics of continuous families.
    #[arg(long, default_value_t = 1000)]
    pub mc_samples: usize,
}

#[derive(Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Algorithm: rsd, arsd-cvx, arsd-sc, arsd-eff-cvx, arsd-eff-sc.
    #[arg(long, default_value = "rsd")]
    pub algo: String,
    #[arg(long, default_value_t = 1000)]
    pub iters: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Stop when the recorded optimality measure falls below this.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// ν for the accelerated variants (default: from diagnostics).
    #[arg(long)]
    pub nu: Option<f64>,
    /// σ for the strongly convex variants (default: from diagnostics).
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Record a trace row every this many iterations.
    #[arg(long, default_value_t = 1)]
    pub record_every: u64,
    /// Proceed even when the sampling-validity check fails.
    #[arg(long)]
    pub force: bool,
    /// Skip diagnostics entirely (no optimality measure in the trace).
    #[arg(long)]
    pub skip_diagnostics: bool,
    /// Measure wall time into the trace (makes artifacts run-dependent).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Args)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Also run the span/coverage check of the sampling.
    #[arg(long)]
    pub span_check: bool,
}

#[derive(Args)]
pub struct ExperimentArgs {
    /// exp1, exp2 or exp3.
    pub name: String,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seeds: Option<u64>,
    #[arg(long)]
    pub iters: Option<u64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Comma-separated sketch widths.
    #[arg(long, value_delimiter = ',')]
    pub p_grid: Option<Vec<usize>>,
    #[arg(long)]
    pub data_seed: Option<u64>,
    /// Portfolio expected-returns CSV for exp3 (one value per line).
    #[arg(long, requires = "sigma_csv")]
    pub mu_csv: Option<PathBuf>,
    /// Portfolio covariance CSV for exp3 (n rows of n comma-separated values).
    #[arg(long, requires = "mu_csv")]
    pub sigma_csv: Option<PathBuf>,
    /// Portfolio class-membership CSV for exp3 (asset_id,class_id lines).
    #[arg(long)]
    pub classes_csv: Option<PathBuf>,
}

pub fn dispatch(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Diagnose(args) => cmd_diagnose(args),
        Command::Experiment(args) => cmd_experiment(args),
    };
    match result {
        Ok(code) => code,
        Err(CliError { code, message }) => {
            eprintln!("error: {message}");
            code
        }
    }
}

struct CliError {
    code: i32,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn assumption(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_ASSUMPTION,
            message: message.into(),
        }
    }

    fn runtime(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_RUNTIME,
            message: message.into(),
        }
    }
}

impl From<SpecError> for CliError {
    fn from(e: SpecError) -> Self {
        CliError::usage(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::runtime(format!("i/o: {e}"))
    }
}

fn parse_algorithm(s: &str) -> Result<Algorithm, CliError> {
    Ok(match s {
        "rsd" => Algorithm::Rsd,
        "arsd-cvx" => Algorithm::ArsdConvex,
        "arsd-sc" => Algorithm::ArsdStronglyConvex,
        "arsd-eff-cvx" => Algorithm::ArsdEfficientConvex,
        "arsd-eff-sc" => Algorithm::ArsdEfficientStronglyConvex,
        other => {
            return Err(CliError::usage(format!(
                "unknown algorithm '{other}' (expected rsd, arsd-cvx, arsd-sc, arsd-eff-cvx, arsd-eff-sc)"
            )))
        }
    })
}

struct Wired {
    problem: sketch_descent::problems::ConstrainedProblem,
    dist: sketch_descent::sketch::SketchDistribution,
}

fn wire(args: &ProblemArgs, seed: u64, force: bool) -> Result<Wired, CliError> {
    let params = BuiltinParams {
        n: args.n,
        delta: args.delta,
        data_seed: args.data_seed,
        ..Default::default()
    };
    let problem = resolve_problem(&args.problem, &params)?;
    let problem = apply_smoothness_choice(problem, &args.smoothness)?;
    problem
        .validate()
        .map_err(|e| CliError::usage(e.to_string()))?;
    let dist = resolve_sketch(&args.sketch, args.p, &problem, seed)?;
    // Dense continuous sketches need p > m to intersect ker(A) at all.
    if let Some(p) = dist.kind().requires_width_exceeding_m() {
        if p <= problem.m() && !force {
            return Err(CliError::assumption(format!(
                "sketch width p = {p} does not exceed the m = {} constraint rows; \
                 range(S) ∩ ker(A) is trivial almost surely and the sampling cannot move \
                 (pass --force to run anyway)",
                problem.m()
            )));
        }
    }
    Ok(Wired { problem, dist })
}

fn cmd_solve(args: SolveArgs) -> Result<i32, CliError> {
    let algorithm = parse_algorithm(&args.algo)?;
    let Wired { problem, dist } = wire(&args.problem, args.seed, args.force)?;
    std::fs::create_dir_all(&args.out)?;

    let mut zop = None;
    let mut constants = None;
    if !args.skip_diagnostics {
        let (diag, z) =
            DiagnosticsReport::compute(&problem, &dist, args.problem.mc_samples, false)
                .map_err(CliError::runtime)?;
        diag.write(&args.out.join("diagnostics.json"))?;
        if !diag.assumption2.holds && !args.force {
            return Err(CliError::assumption(format!(
                "expected operator is not positive definite on ker(A) \
                 (λ_min = {:.3e} over a {}-dimensional kernel); pass --force to run anyway",
                diag.assumption2.lambda_min_on_kernel, diag.assumption2.kernel_dim
            )));
        }
        constants = diag.constants.clone();
        zop = Some(z);
    } else if args.tol.is_some() {
        return Err(CliError::usage(
            "--tol needs diagnostics; drop --skip-diagnostics",
        ));
    }

    // Parameter resolution: flags win, then diagnostics.
    let mut warnings: Vec<String> = Vec::new();
    let nu = args.nu.or_else(|| {
        constants.as_ref().map(|c| match c.estimate {
            sketch_descent::operators::ConstantsEstimate::Exact => c.nu_max,
            // Estimated ν_max can undershoot; use the safe upper bound.
            sketch_descent::operators::ConstantsEstimate::MonteCarlo { .. } => c.nu_upper_bound,
        })
    });
    let sigma = args.sigma.or_else(|| {
        constants
            .as_ref()
            .and_then(|c| c.sigma_z.map(|s| s.max(1e-15)))
    });
    if let (Some(nu), Some(c)) = (args.nu, constants.as_ref()) {
        if nu < c.nu_max {
            let msg = format!(
                "supplied nu = {nu} is below nu_max = {:.6e}; the accelerated rate guarantees do not apply",
                c.nu_max
            );
            eprintln!("warning: {msg}");
            warnings.push(msg);
        }
    }
    if algorithm.needs_nu() && nu.is_none() {
        return Err(CliError::usage(
            "this algorithm needs --nu (no diagnostics value available)",
        ));
    }
    if algorithm.needs_sigma() && sigma.is_none() {
        return Err(CliError::usage(
            "this algorithm needs --sigma (no diagnostics value available)",
        ));
    }

    let config = SolverConfig {
        algorithm,
        max_iters: args.iters,
        seed: args.seed,
        nu,
        sigma: sigma.map(|s| match nu {
            Some(nu) => s.min(nu),
            None => s,
        }),
        record_every: args.record_every,
        stop_tolerance: args.tol,
        gap_stop: None,
        timing: args.timing,
    };
    let mut trace = sketch_descent::solvers::run(&problem, &dist, &config, zop.as_ref())
        .map_err(|e| CliError::runtime(e.to_string()))?;
    trace.warnings.extend(warnings);

    std::fs::write(args.out.join("trace.csv"), trace.to_csv_string())?;
    RunSummary::from_trace(&trace, problem.f_star).write(&args.out.join("summary.json"))?;
    let last = trace.final_row().expect("trace has rows");
    println!(
        "k={} f={:.6e} feas={:.3e} stop={:?} zero_steps={}",
        last.k, last.f, last.feas_inf, trace.stop, trace.zero_steps
    );
    Ok(EXIT_OK)
}

fn cmd_diagnose(args: DiagnoseArgs) -> Result<i32, CliError> {
    let Wired { problem, dist } = wire(&args.problem, 0, true)?;
    std::fs::create_dir_all(&args.out)?;
    let (diag, _zop) = DiagnosticsReport::compute(&problem, &dist, args.problem.mc_samples, args.span_check)
        .map_err(CliError::runtime)?;
    diag.write(&args.out.join("diagnostics.json"))?;
    println!(
        "{}",
        serde_json::to_string_pretty(&diag).expect("serialize")
    );
    Ok(EXIT_OK)
}

fn cmd_experiment(args: ExperimentArgs) -> Result<i32, CliError> {
    let name = ExperimentName::parse(&args.name)?;
    let overrides = ExperimentOverrides {
        n: args.n,
        seeds: args.seeds,
        iters: args.iters,
        tol: args.tol,
        delta: args.delta,
        p_grid: args.p_grid.clone(),
        data_seed: args.data_seed,
        portfolio_csv: match (&args.mu_csv, &args.sigma_csv) {
            (Some(mu), Some(sigma)) => Some(PortfolioCsv {
                mu: mu.clone(),
                sigma: sigma.clone(),
                classes: args.classes_csv.clone(),
            }),
            _ => None,
        },
    };
    let pool = crate::build_pool();
    let report = pool
        .install(|| run_experiment(name, &overrides))
        .map_err(|e| CliError::runtime(e.to_string()))?;
    report.write(&args.out)?;
    for cell in &report.cells {
        println!(
            "{:<44} iters_to_tol(median)={:<10} ns/iter={:<12} status={}",
            cell.name,
            cell.iters_to_tol_median
                .map_or("-".to_string(), |v| v.to_string()),
            cell.mean_ns_per_iter
                .map_or("-".to_string(), |v| format!("{v:.0}")),
            cell.status
        );
    }
    println!(
        "wrote {} and {}",
        args.out.join("aggregate.csv").display(),
        args.out.join("report.json").display()
    );
    Ok(EXIT_OK)
}
