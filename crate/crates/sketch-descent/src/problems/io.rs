//! Problem ingestion: a JSON description of constrained instances, plus CSV
//! readers for portfolio data.
//!
//! JSON schema (fields irrelevant to a kind may be omitted):
//!
//! ```json
//! {
//!   "n": 4,
//!   "constraints": { "A": { "dense": [[1,1,1,1]] }, "b": [0] },
//!   "objective": { "kind": "quadratic", "hessian": [[..]], "linear": [..], "offset": 0 },
//!   "smoothness": { "kind": "hessian" },
//!   "x0": [0, 0, 0, 0]
//! }
//! ```
//!
//! Objective kinds: `quadratic`, `exp1-structured`, `exp1-random`, `exp2`,
//! `pagerank`, `dual-ridge`, `portfolio`. The benchmark kinds build their own
//! constraints and starting points; explicit `constraints`/`x0` override
//! them only for `quadratic`. Smoothness kinds: `hessian` (default, exact
//! Hessian of the quadratic objective), `full` (explicit matrix),
//! `scaled-identity` (λ_max(H)·I), `per-sketch`.

use super::builtin::{
    make_dual_erm_problem, make_exp1_problem, make_exp2_problem, make_pagerank_problem,
    make_portfolio_problem, proportional_allocations, Exp1Variant, LossKind, PortfolioData,
};
use super::{ConstrainedProblem, Objective, ProblemError};
use crate::forms::{SmoothnessSpec, SymmetricForm};
use crate::linalg::DenseMatrix;
use serde::Deserialize;
use std::path::Path;

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    /// `{"dense": [[...], ...]}`
    Dense { dense: Vec<Vec<f64>> },
    /// `{"rows": m, "cols": n, "entries": [[i, j, value], ...]}`
    Triplets {
        rows: usize,
        cols: usize,
        entries: Vec<(usize, usize, f64)>,
    },
}

impl MatrixSpec {
    pub fn build(&self) -> Result<DenseMatrix, ProblemError> {
        match self {
            MatrixSpec::Dense { dense } => Ok(DenseMatrix::from_rows(dense)?),
            MatrixSpec::Triplets {
                rows,
                cols,
                entries,
            } => {
                let mut m = DenseMatrix::zeros(*rows, *cols);
                for &(i, j, v) in entries {
                    if i >= *rows || j >= *cols {
                        return Err(ProblemError::Parse(format!(
                            "triplet index ({i}, {j}) outside {rows}x{cols}"
                        )));
                    }
                    m[(i, j)] = v;
                }
                Ok(m)
            }
        }
    }
}

#[derive(Debug, Deserialize)]
pub struct ConstraintsSpec {
    #[serde(rename = "A")]
    pub a: MatrixSpec,
    pub b: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ObjectiveSpec {
    Quadratic {
        hessian: Vec<Vec<f64>>,
        #[serde(default)]
        linear: Option<Vec<f64>>,
        #[serde(default)]
        offset: f64,
    },
    Exp1Structured {
        delta: f64,
    },
    Exp1Random {
        delta: f64,
        #[serde(default)]
        seed: u64,
    },
    Exp2 {
        delta: f64,
    },
    Pagerank {
        incidence: Vec<Vec<f64>>,
    },
    DualRidge {
        features: Vec<Vec<f64>>,
        labels: Vec<f64>,
    },
    Portfolio {
        mu: Vec<f64>,
        sigma: Vec<Vec<f64>>,
        target_return: f64,
        #[serde(default)]
        classes: Vec<usize>,
        #[serde(default)]
        allocations: Vec<f64>,
    },
}

#[derive(Debug, Deserialize, Default, Clone, Copy, PartialEq, Eq)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SmoothnessFileSpec {
    /// Exact Hessian of the quadratic objective.
    #[default]
    Hessian,
    /// λ_max(H) · I.
    ScaledIdentity,
    /// Per-sample rule from the objective Hessian.
    PerSketch,
}

#[derive(Debug, Deserialize)]
pub struct ProblemFile {
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub constraints: Option<ConstraintsSpec>,
    pub objective: ObjectiveSpec,
    #[serde(default)]
    pub smoothness: Option<SmoothnessFileSpec>,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
}

/// Parses a problem description from JSON text.
pub fn problem_from_json(text: &str) -> Result<ConstrainedProblem, ProblemError> {
    let file: ProblemFile =
        serde_json::from_str(text).map_err(|e| ProblemError::Parse(e.to_string()))?;
    build_problem(file)
}

/// Reads a problem description from a JSON file.
pub fn problem_from_path(path: &Path) -> Result<ConstrainedProblem, ProblemError> {
    let text = std::fs::read_to_string(path).map_err(|e| ProblemError::Io(e.to_string()))?;
    problem_from_json(&text)
}

fn build_problem(file: ProblemFile) -> Result<ConstrainedProblem, ProblemError> {
    let mut problem = match file.objective {
        ObjectiveSpec::Quadratic {
            hessian,
            linear,
            offset,
        } => {
            let h = DenseMatrix::from_rows(&hessian)?;
            if !h.is_symmetric(1e-10) {
                return Err(ProblemError::Parse("hessian must be symmetric".into()));
            }
            let n = h.rows();
            let constraints = file.constraints.as_ref().ok_or_else(|| {
                ProblemError::Parse("quadratic objectives need explicit constraints".into())
            })?;
            let a = constraints.a.build()?;
            let b = constraints.b.clone();
            let linear = linear.unwrap_or_else(|| vec![0.0; n]);
            let hessian = SymmetricForm::Dense(h);
            let x0 = match &file.x0 {
                Some(x) => x.clone(),
                None => ConstrainedProblem::least_norm_feasible(&a, &b)?,
            };
            let objective = Objective::quadratic(hessian.clone(), linear, offset);
            ConstrainedProblem {
                n,
                a,
                b,
                smoothness: SmoothnessSpec::Fixed(hessian.clone()),
                strong_convexity: Some(hessian),
                objective,
                f_star: None,
                x0,
            }
        }
        ObjectiveSpec::Exp1Structured { delta } => {
            let n = file.n.ok_or_else(|| {
                ProblemError::Parse("exp1-structured needs the dimension field n".into())
            })?;
            make_exp1_problem(n, delta, Exp1Variant::Structured, 0)?
        }
        ObjectiveSpec::Exp1Random { delta, seed } => {
            let n = file.n.ok_or_else(|| {
                ProblemError::Parse("exp1-random needs the dimension field n".into())
            })?;
            make_exp1_problem(n, delta, Exp1Variant::RandomRankDeficient, seed)?
        }
        ObjectiveSpec::Exp2 { delta } => {
            let n = file
                .n
                .ok_or_else(|| ProblemError::Parse("exp2 needs the dimension field n".into()))?;
            make_exp2_problem(n, delta)?
        }
        ObjectiveSpec::Pagerank { incidence } => {
            make_pagerank_problem(&DenseMatrix::from_rows(&incidence)?)?
        }
        ObjectiveSpec::DualRidge { features, labels } => {
            make_dual_erm_problem(&DenseMatrix::from_rows(&features)?, &labels, LossKind::Ridge)?
        }
        ObjectiveSpec::Portfolio {
            mu,
            sigma,
            target_return,
            classes,
            allocations,
        } => {
            let sigma = SymmetricForm::Dense(DenseMatrix::from_rows(&sigma)?);
            let allocations = if allocations.is_empty() && !classes.is_empty() {
                let c = classes.iter().max().map_or(0, |&c| c + 1);
                proportional_allocations(&classes, c)
            } else {
                allocations
            };
            make_portfolio_problem(&mu, sigma, target_return, &classes, &allocations)?
        }
    };
    if let Some(x0) = file.x0 {
        if x0.len() != problem.n {
            return Err(ProblemError::Parse(format!(
                "x0 has length {}, expected {}",
                x0.len(),
                problem.n
            )));
        }
        problem.x0 = x0;
    }
    match file.smoothness.unwrap_or_default() {
        SmoothnessFileSpec::Hessian => {}
        SmoothnessFileSpec::ScaledIdentity => {
            let h = problem.objective.hessian().ok_or_else(|| {
                ProblemError::Parse("scaled-identity smoothness needs a quadratic objective".into())
            })?;
            let lambda = h.lambda_max()?;
            problem.smoothness = SmoothnessSpec::scaled_identity(problem.n, lambda);
        }
        SmoothnessFileSpec::PerSketch => {
            let h = problem.objective.hessian().ok_or_else(|| {
                ProblemError::Parse("per-sketch smoothness needs a quadratic objective".into())
            })?;
            problem.smoothness = SmoothnessSpec::PerSketch(h.clone());
        }
    }
    problem.validate()?;
    Ok(problem)
}

/// Reads portfolio inputs from three CSV files: `mu.csv` (one value per
/// line), `sigma.csv` (n rows of n comma-separated values), `classes.csv`
/// (`asset_id,class_id` per line).
pub fn load_portfolio_csv(
    mu_path: &Path,
    sigma_path: &Path,
    classes_path: Option<&Path>,
) -> Result<PortfolioData, ProblemError> {
    let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| ProblemError::Io(e.to_string()));
    let mu: Vec<f64> = read(mu_path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.trim()
                .parse::<f64>()
                .map_err(|e| ProblemError::Parse(format!("mu: {e}")))
        })
        .collect::<Result<_, _>>()?;
    let n = mu.len();

    let sigma_rows: Vec<Vec<f64>> = read(sigma_path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|e| ProblemError::Parse(format!("sigma: {e}")))
                })
                .collect::<Result<Vec<f64>, _>>()
        })
        .collect::<Result<_, _>>()?;
    if sigma_rows.len() != n || sigma_rows.iter().any(|r| r.len() != n) {
        return Err(ProblemError::Parse(format!(
            "sigma.csv must be {n}x{n} to match mu.csv"
        )));
    }
    let sigma = DenseMatrix::from_rows(&sigma_rows)?;
    if !sigma.is_symmetric(1e-8) {
        return Err(ProblemError::Parse("sigma.csv must be symmetric".into()));
    }

    let class_assignment = match classes_path {
        None => vec![0; n],
        Some(p) => {
            let mut assignment = vec![usize::MAX; n];
            for line in read(p)?.lines().filter(|l| !l.trim().is_empty()) {
                let mut parts = line.split(',');
                let asset: usize = parts
                    .next()
                    .ok_or_else(|| ProblemError::Parse("classes.csv: missing asset id".into()))?
                    .trim()
                    .parse()
                    .map_err(|e| ProblemError::Parse(format!("classes: {e}")))?;
                let class: usize = parts
                    .next()
                    .ok_or_else(|| ProblemError::Parse("classes.csv: missing class id".into()))?
                    .trim()
                    .parse()
                    .map_err(|e| ProblemError::Parse(format!("classes: {e}")))?;
                if asset >= n {
                    return Err(ProblemError::Parse(format!(
                        "classes.csv: asset id {asset} out of range"
                    )));
                }
                assignment[asset] = class;
            }
            if let Some(missing) = assignment.iter().position(|&c| c == usize::MAX) {
                return Err(ProblemError::Parse(format!(
                    "classes.csv: asset {missing} has no class"
                )));
            }
            assignment
        }
    };
    Ok(PortfolioData {
        mu,
        sigma: SymmetricForm::Dense(sigma),
        class_assignment,
    })
}
