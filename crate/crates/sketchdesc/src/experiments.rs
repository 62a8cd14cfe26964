//! The three benchmark experiments: sampling-strategy comparison, curvature
//! bound comparison, and the portfolio scaling study.
//!
//! Each experiment expands into a grid of cells (problem × sketch × solver
//! configuration); every cell runs over a shared list of seeds, aggregates
//! the objective traces, and reports iterations-to-tolerance. Runs execute
//! on a bounded worker pool; output content depends only on the grid order,
//! never on scheduling.

use crate::report::DiagnosticsReport;
use crate::spec::{builtin_problem, BuiltinParams, SpecError};
use rayon::prelude::*;
use serde::Serialize;
use sketch_descent::forms::SmoothnessSpec;
use sketch_descent::problems::ConstrainedProblem;
use sketch_descent::sketch::{PartitionMode, SketchDistribution, SketchKind};
use sketch_descent::solvers::{Algorithm, GapStop, SolverConfig};
use sketch_descent::trace::{aggregate, AggregateTrace, RunTrace, StopReason, AGGREGATE_HEADER};
use std::io::Write;
use std::path::PathBuf;

use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentName {
    Exp1,
    Exp2,
    Exp3,
}

impl ExperimentName {
    pub fn parse(s: &str) -> Result<Self, SpecError> {
        match s {
            "exp1" => Ok(Self::Exp1),
            "exp2" => Ok(Self::Exp2),
            "exp3" => Ok(Self::Exp3),
            other => Err(SpecError::Usage(format!(
                "unknown experiment '{other}' (expected exp1, exp2, exp3)"
            ))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Exp1 => "exp1",
            Self::Exp2 => "exp2",
            Self::Exp3 => "exp3",
        }
    }
}

/// Overridable experiment knobs; `None` means the experiment default.
#[derive(Debug, Clone, Default)]
pub struct ExperimentOverrides {
    pub n: Option<usize>,
    pub seeds: Option<u64>,
    pub iters: Option<u64>,
    pub tol: Option<f64>,
    pub delta: Option<f64>,
    pub p_grid: Option<Vec<usize>>,
    pub data_seed: Option<u64>,
    /// Portfolio data from CSV files (mu, sigma, optional classes) instead
    /// of the synthetic generator.
    pub portfolio_csv: Option<PortfolioCsv>,
}

#[derive(Debug, Clone)]
pub struct PortfolioCsv {
    pub mu: PathBuf,
    pub sigma: PathBuf,
    pub classes: Option<PathBuf>,
}

/// One grid cell: a fully wired run configuration.
struct Cell {
    name: String,
    problem: Arc<ConstrainedProblem>,
    dist: SketchDistribution,
    algorithm: Algorithm,
    nu: Option<f64>,
    sigma: Option<f64>,
    budget: u64,
    /// Absolute gap threshold (tol × initial gap).
    gap_tol_abs: f64,
    record_every: u64,
    timing: bool,
    meta: CellMeta,
}

#[derive(Debug, Clone, Serialize, Default)]
pub struct CellMeta {
    pub problem: String,
    pub sketch: String,
    pub algo: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub smoothness: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_z: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    /// √(σ_Z/ν): per-step contraction of the accelerated iteration.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate_sqrt_sigma_over_nu: Option<f64>,
}

/// Per-cell results.
#[derive(Debug, Clone, Serialize)]
pub struct CellReport {
    pub name: String,
    #[serde(flatten)]
    pub meta: CellMeta,
    pub status: String,
    pub seeds: u64,
    pub iters_to_tol: Vec<Option<u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iters_to_tol_median: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_ns_per_iter: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_ns_to_tol_median: Option<f64>,
    #[serde(skip)]
    pub aggregate: Option<AggregateTrace>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AggregateReport {
    pub experiment: String,
    pub relative_gap_tol: f64,
    pub seeds: u64,
    pub cells: Vec<CellReport>,
}

impl AggregateReport {
    pub fn cell(&self, name: &str) -> Option<&CellReport> {
        self.cells.iter().find(|c| c.name == name)
    }

    /// Writes aggregate.csv and report.json into the output directory.
    pub fn write(&self, out: &PathBuf) -> std::io::Result<()> {
        std::fs::create_dir_all(out)?;
        let mut csv = Vec::new();
        writeln!(csv, "{AGGREGATE_HEADER}")?;
        for cell in &self.cells {
            if let Some(agg) = &cell.aggregate {
                agg.write_csv_rows(&cell.name, &mut csv)?;
            }
        }
        std::fs::write(out.join("aggregate.csv"), csv)?;
        std::fs::write(
            out.join("report.json"),
            serde_json::to_string_pretty(self).expect("serialize") + "\n",
        )?;
        Ok(())
    }
}

/// Lower median; budget-exhausted runs (None) order after every finished one.
fn median_iters(values: &[Option<u64>]) -> Option<u64> {
    let mut sorted: Vec<Option<u64>> = values.to_vec();
    sorted.sort_by_key(|v| v.unwrap_or(u64::MAX));
    sorted[(sorted.len().saturating_sub(1)) / 2]
}

fn run_cell(cell: &Cell, seeds: u64, subsample: u64) -> CellReport {
    let f_star = cell.problem.f_star.unwrap_or(0.0);
    let jobs: Vec<u64> = (1..=seeds).collect();
    let results: Vec<Result<RunTrace, String>> = jobs
        .par_iter()
        .map(|&seed| {
            let config = SolverConfig {
                algorithm: cell.algorithm,
                max_iters: cell.budget,
                seed,
                nu: cell.nu,
                sigma: cell.sigma,
                record_every: cell.record_every,
                stop_tolerance: None,
                gap_stop: Some(GapStop {
                    f_star,
                    tol: cell.gap_tol_abs,
                }),
                timing: cell.timing,
            };
            sketch_descent::solvers::run(&cell.problem, &cell.dist, &config, None)
                .map_err(|e| e.to_string())
        })
        .collect();

    let mut traces = Vec::with_capacity(results.len());
    for r in results {
        match r {
            Ok(t) => traces.push(t),
            Err(e) => {
                return CellReport {
                    name: cell.name.clone(),
                    meta: cell.meta.clone(),
                    status: format!("failed: {e}"),
                    seeds,
                    iters_to_tol: vec![None; seeds as usize],
                    iters_to_tol_median: None,
                    mean_ns_per_iter: None,
                    wall_ns_to_tol_median: None,
                    aggregate: None,
                }
            }
        }
    }

    let iters_to_tol: Vec<Option<u64>> = traces
        .iter()
        .map(|t| (t.stop == StopReason::Gap).then_some(t.iters))
        .collect();
    let ns_values: Vec<f64> = traces.iter().filter_map(|t| t.mean_ns_per_iter).collect();
    let mean_ns = (!ns_values.is_empty())
        .then(|| ns_values.iter().sum::<f64>() / ns_values.len() as f64);
    let wall_to_tol: Vec<Option<u64>> = traces
        .iter()
        .map(|t| {
            match (t.stop == StopReason::Gap, t.mean_ns_per_iter) {
                (true, Some(ns)) => Some((t.iters as f64 * ns) as u64),
                _ => None,
            }
        })
        .collect();
    let wall_median = median_iters(&wall_to_tol).map(|v| v as f64);

    // Thin the aggregate curve for storage.
    let refs: Vec<&RunTrace> = traces.iter().collect();
    let mut agg = aggregate(&refs);
    if subsample > 1 {
        let keep: Vec<usize> = (0..agg.ks.len())
            .filter(|&i| {
                i == 0 || i + 1 == agg.ks.len() || agg.ks[i] % subsample == 0
            })
            .collect();
        agg = AggregateTrace {
            ks: keep.iter().map(|&i| agg.ks[i]).collect(),
            f_mean: keep.iter().map(|&i| agg.f_mean[i]).collect(),
            f_median: keep.iter().map(|&i| agg.f_median[i]).collect(),
            f_p10: keep.iter().map(|&i| agg.f_p10[i]).collect(),
            f_p90: keep.iter().map(|&i| agg.f_p90[i]).collect(),
        };
    }

    CellReport {
        name: cell.name.clone(),
        meta: cell.meta.clone(),
        status: "ok".into(),
        seeds,
        iters_to_tol_median: median_iters(&iters_to_tol),
        iters_to_tol,
        mean_ns_per_iter: mean_ns,
        wall_ns_to_tol_median: wall_median,
        aggregate: Some(agg),
    }
}

pub fn run_experiment(
    name: ExperimentName,
    overrides: &ExperimentOverrides,
) -> Result<AggregateReport, SpecError> {
    match name {
        ExperimentName::Exp1 => run_exp1(overrides),
        ExperimentName::Exp2 => run_exp2(overrides),
        ExperimentName::Exp3 => run_exp3(overrides),
    }
}

fn sketch_for(
    kind: &str,
    p: usize,
    problem: &ConstrainedProblem,
) -> Result<SketchDistribution, SpecError> {
    let kind = match kind {
        "fixed-pairs" => SketchKind::FixedPartitionPairs {
            mode: PartitionMode::Cyclic,
        },
        "random-pairs" => SketchKind::RandomTuples { p: 2 },
        "random-tuples" => SketchKind::RandomTuples { p },
        "gaussian" => SketchKind::GaussianDense { p },
        other => return Err(SpecError::Usage(format!("unknown sketch '{other}'"))),
    };
    Ok(SketchDistribution::new(kind, problem.n, 0, Some(&problem.a))?)
}

/// Sampling-strategy comparison: {fixed, random pairs, Gaussian} × {plain,
/// accelerated} on the structured and the random rank-deficient quadratic.
fn run_exp1(overrides: &ExperimentOverrides) -> Result<AggregateReport, SpecError> {
    let n = overrides.n.unwrap_or(100);
    let delta = overrides.delta.unwrap_or(0.01);
    let seeds = overrides.seeds.unwrap_or(20);
    let rsd_budget = overrides.iters.unwrap_or(400_000);
    let arsd_budget = (rsd_budget / 4).max(10_000);
    let tol = overrides.tol.unwrap_or(1e-6);
    let data_seed = overrides.data_seed.unwrap_or(7);
    let params = BuiltinParams {
        n,
        delta,
        data_seed,
        ..Default::default()
    };

    let mut cells: Vec<Cell> = Vec::new();
    for problem_name in ["exp1-structured", "exp1-random"] {
        let problem = Arc::new(builtin_problem(problem_name, &params)?);
        let gap0 = problem.value(&problem.x0) - problem.f_star.unwrap_or(0.0);
        for sketch_name in ["fixed-pairs", "random-pairs", "gaussian"] {
            let dist = sketch_for(sketch_name, 2, &problem)?;
            // Rate constants: exact for the pair families, Monte-Carlo for
            // the Gaussian family (with the safe ν upper bound).
            let (diag, _zop) = DiagnosticsReport::compute(&problem, &dist, 2000, false)
                .map_err(SpecError::Usage)?;
            let constants = diag.constants.as_ref();
            let (sigma, nu) = match (&diag.z_source, constants) {
                (_, None) => (None, None),
                (sketch_descent::operators::ZSource::Exact { .. }, Some(c)) => {
                    (c.sigma_z, Some(c.nu_max))
                }
                (sketch_descent::operators::ZSource::MonteCarlo { .. }, Some(c)) => {
                    // Estimated ν_max with margin for Monte-Carlo error; the
                    // analytic upper bound is orders of magnitude looser and
                    // would forfeit the acceleration entirely.
                    (c.sigma_z, Some(c.nu_max * 1.25))
                }
            };
            for (algo_name, algorithm, budget) in [
                ("rsd", Algorithm::Rsd, rsd_budget),
                ("arsd", Algorithm::ArsdStronglyConvex, arsd_budget),
            ] {
                let (nu_used, sigma_used) = match (nu, sigma) {
                    (Some(nu), Some(sigma)) => {
                        let sigma = sigma.max(1e-12).min(nu);
                        (Some(nu), Some(sigma))
                    }
                    _ => (None, None),
                };
                cells.push(Cell {
                    name: format!("{problem_name}/{sketch_name}/{algo_name}"),
                    problem: problem.clone(),
                    dist: dist.clone(),
                    algorithm,
                    nu: nu_used,
                    sigma: sigma_used,
                    budget,
                    gap_tol_abs: tol * gap0,
                    record_every: (budget / 400).max(1),
                    timing: false,
                    meta: CellMeta {
                        problem: problem_name.into(),
                        sketch: sketch_name.into(),
                        algo: algo_name.into(),
                        p: Some(2),
                        delta: Some(delta),
                        sigma_z: sigma_used,
                        nu: nu_used,
                        rate_sqrt_sigma_over_nu: match (sigma_used, nu_used) {
                            (Some(s), Some(nv)) => Some((s / nv).sqrt()),
                            _ => None,
                        },
                        ..Default::default()
                    },
                });
            }
        }
    }

    let reports = cells
        .iter()
        .map(|c| run_cell(c, seeds, (c.budget / 200).max(1)))
        .collect();
    Ok(AggregateReport {
        experiment: "exp1".into(),
        relative_gap_tol: tol,
        seeds,
        cells: reports,
    })
}

/// Curvature-bound comparison: the plain iteration with M ∈ {B, λ_max(B)I,
/// per-sketch} over tuple widths, plus the Gaussian sketch with M = B.
fn run_exp2(overrides: &ExperimentOverrides) -> Result<AggregateReport, SpecError> {
    let n = overrides.n.unwrap_or(100);
    let seeds = overrides.seeds.unwrap_or(20);
    let budget = overrides.iters.unwrap_or(200_000);
    let tol = overrides.tol.unwrap_or(1e-6);
    let deltas = match overrides.delta {
        Some(d) => vec![d],
        None => vec![0.01, 0.5],
    };
    let p_grid = overrides
        .p_grid
        .clone()
        .unwrap_or_else(|| vec![2, 4, 8, 16]);

    let mut cells: Vec<Cell> = Vec::new();
    for &delta in &deltas {
        let base = Arc::new(builtin_problem(
            "exp2",
            &BuiltinParams {
                n,
                delta,
                ..Default::default()
            },
        )?);
        let gap0 = base.value(&base.x0) - base.f_star.unwrap_or(0.0);
        let b_form = base
            .objective
            .hessian()
            .expect("exp2 objective is quadratic")
            .clone();
        let lambda_max = b_form
            .lambda_max()
            .map_err(|e| SpecError::Usage(e.to_string()))?;
        let smoothness_choices: Vec<(&str, SmoothnessSpec)> = vec![
            ("full", SmoothnessSpec::Fixed(b_form.clone())),
            (
                "scaled-identity",
                SmoothnessSpec::scaled_identity(n, lambda_max),
            ),
            ("per-sketch", SmoothnessSpec::PerSketch(b_form.clone())),
        ];
        for (m_name, smoothness) in &smoothness_choices {
            for &p in &p_grid {
                let problem = Arc::new((*base).clone().with_smoothness(smoothness.clone()));
                let dist = sketch_for("random-tuples", p, &problem)?;
                cells.push(Cell {
                    name: format!("delta{delta}/tuples-p{p}/M-{m_name}"),
                    problem,
                    dist,
                    algorithm: Algorithm::Rsd,
                    nu: None,
                    sigma: None,
                    budget,
                    gap_tol_abs: tol * gap0,
                    record_every: (budget / 400).max(1),
                    timing: false,
                    meta: CellMeta {
                        problem: "exp2".into(),
                        sketch: "random-tuples".into(),
                        algo: "rsd".into(),
                        p: Some(p),
                        smoothness: Some((*m_name).into()),
                        delta: Some(delta),
                        ..Default::default()
                    },
                });
            }
        }
        // Gaussian sketch with the full curvature bound.
        for &p in &p_grid {
            let problem = Arc::new((*base).clone());
            let dist = sketch_for("gaussian", p, &problem)?;
            cells.push(Cell {
                name: format!("delta{delta}/gaussian-p{p}/M-full"),
                problem,
                dist,
                algorithm: Algorithm::Rsd,
                nu: None,
                sigma: None,
                budget,
                gap_tol_abs: tol * gap0,
                record_every: (budget / 400).max(1),
                timing: false,
                meta: CellMeta {
                    problem: "exp2".into(),
                    sketch: "gaussian".into(),
                    algo: "rsd".into(),
                    p: Some(p),
                    smoothness: Some("full".into()),
                    delta: Some(delta),
                    ..Default::default()
                },
            });
        }
    }

    let reports = cells
        .iter()
        .map(|c| run_cell(c, seeds, (c.budget / 200).max(1)))
        .collect();
    Ok(AggregateReport {
        experiment: "exp2".into(),
        relative_gap_tol: tol,
        seeds,
        cells: reports,
    })
}

/// Portfolio scaling study: Gaussian sketches over a width grid, with
/// per-iteration wall time measured.
fn run_exp3(overrides: &ExperimentOverrides) -> Result<AggregateReport, SpecError> {
    let n = overrides.n.unwrap_or(500);
    let classes = 11.min(n);
    let seeds = overrides.seeds.unwrap_or(3);
    let budget = overrides.iters.unwrap_or(100_000);
    let tol = overrides.tol.unwrap_or(1e-4);
    let p_grid = overrides
        .p_grid
        .clone()
        .unwrap_or_else(|| vec![16, 32, 64, 128]);
    let problem = match &overrides.portfolio_csv {
        None => {
            let params = BuiltinParams {
                n,
                classes,
                data_seed: overrides.data_seed.unwrap_or(7),
                ..Default::default()
            };
            builtin_problem("portfolio-synth", &params)?
        }
        Some(csv) => {
            let data = sketch_descent::problems::io::load_portfolio_csv(
                &csv.mu,
                &csv.sigma,
                csv.classes.as_deref(),
            )?;
            let c = data
                .class_assignment
                .iter()
                .max()
                .map_or(1, |&cls| cls + 1);
            let alloc = sketch_descent::problems::proportional_allocations(
                &data.class_assignment,
                c,
            );
            sketch_descent::problems::make_portfolio_problem(
                &data.mu,
                data.sigma.clone(),
                BuiltinParams::default().target_return,
                &data.class_assignment,
                &alloc,
            )?
        }
    };
    let problem = Arc::new(
        problem
            .with_computed_optimum()
            .map_err(SpecError::Problem)?,
    );
    let gap0 = problem.value(&problem.x0) - problem.f_star.unwrap_or(0.0);

    let mut cells: Vec<Cell> = Vec::new();
    for &p in &p_grid {
        if p <= problem.m() {
            return Err(SpecError::Usage(format!(
                "gaussian width {p} must exceed the {} constraint rows",
                problem.m()
            )));
        }
        let dist = sketch_for("gaussian", p, &problem)?;
        cells.push(Cell {
            name: format!("portfolio/gaussian-p{p}"),
            problem: problem.clone(),
            dist,
            algorithm: Algorithm::Rsd,
            nu: None,
            sigma: None,
            budget,
            gap_tol_abs: tol * gap0,
            record_every: (budget / 400).max(1),
            timing: true,
            meta: CellMeta {
                problem: "portfolio-synth".into(),
                sketch: "gaussian".into(),
                algo: "rsd".into(),
                p: Some(p),
                ..Default::default()
            },
        });
    }

    let reports = cells
        .iter()
        .map(|c| run_cell(c, seeds, (c.budget / 200).max(1)))
        .collect();
    Ok(AggregateReport {
        experiment: "exp3".into(),
        relative_gap_tol: tol,
        seeds,
        cells: reports,
    })
}
