//! Resolution of CLI problem/sketch specifications into library objects.

use sketch_descent::forms::SmoothnessSpec;
use sketch_descent::linalg::DenseMatrix;
use sketch_descent::problems::{
    io, make_dual_erm_problem, make_exp1_problem, make_exp2_problem, make_pagerank_problem,
    make_portfolio_problem, pagerank_incidence_from_edges, proportional_allocations,
    synth_portfolio_data, ConstrainedProblem, Exp1Variant, LossKind,
};
use sketch_descent::sketch::{PartitionMode, SketchDistribution, SketchKind};
use std::path::Path;

#[derive(Debug)]
pub enum SpecError {
    Usage(String),
    Problem(sketch_descent::problems::ProblemError),
    Sketch(sketch_descent::sketch::SketchError),
}

impl std::fmt::Display for SpecError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SpecError::Usage(msg) => write!(f, "{msg}"),
            SpecError::Problem(e) => write!(f, "{e}"),
            SpecError::Sketch(e) => write!(f, "{e}"),
        }
    }
}

impl From<sketch_descent::problems::ProblemError> for SpecError {
    fn from(e: sketch_descent::problems::ProblemError) -> Self {
        SpecError::Problem(e)
    }
}

impl From<sketch_descent::sketch::SketchError> for SpecError {
    fn from(e: sketch_descent::sketch::SketchError) -> Self {
        SpecError::Sketch(e)
    }
}

/// Knobs for the built-in problems.
#[derive(Debug, Clone, Copy)]
pub struct BuiltinParams {
    pub n: usize,
    pub delta: f64,
    pub data_seed: u64,
    pub classes: usize,
    pub target_return: f64,
}

impl Default for BuiltinParams {
    fn default() -> Self {
        Self {
            n: 100,
            delta: 0.01,
            data_seed: 7,
            classes: 11,
            target_return: 0.05,
        }
    }
}

/// Builds a problem from `builtin:<name>` or a JSON file path.
pub fn resolve_problem(spec: &str, params: &BuiltinParams) -> Result<ConstrainedProblem, SpecError> {
    if let Some(name) = spec.strip_prefix("builtin:") {
        return builtin_problem(name, params);
    }
    Ok(io::problem_from_path(Path::new(spec))?)
}

pub fn builtin_problem(
    name: &str,
    params: &BuiltinParams,
) -> Result<ConstrainedProblem, SpecError> {
    match name {
        "exp1-structured" => Ok(make_exp1_problem(
            params.n,
            params.delta,
            Exp1Variant::Structured,
            params.data_seed,
        )?),
        "exp1-random" => Ok(make_exp1_problem(
            params.n,
            params.delta,
            Exp1Variant::RandomRankDeficient,
            params.data_seed,
        )?),
        "exp2" => Ok(make_exp2_problem(params.n, params.delta)?),
        "pagerank-demo" => {
            // A ring with chords: strongly connected, no dangling columns.
            let n = params.n.max(3);
            let mut edges: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
            for i in 0..n {
                edges.push((i, (i + 7) % n));
            }
            Ok(make_pagerank_problem(&pagerank_incidence_from_edges(
                n, &edges,
            ))?)
        }
        "dual-ridge-synth" => {
            // Deterministic synthetic features/labels.
            let n = params.n;
            let m = (n / 10).clamp(2, 20);
            let features = DenseMatrix::from_fn(m, n, |i, j| {
                let t = (i * n + j) as f64;
                (t * 0.7311).sin()
            });
            let labels: Vec<f64> = (0..n).map(|j| ((j as f64) * 0.311).cos()).collect();
            Ok(make_dual_erm_problem(&features, &labels, LossKind::Ridge)?)
        }
        "portfolio-synth" => {
            let data = synth_portfolio_data(params.n, params.classes, params.data_seed);
            let alloc = proportional_allocations(&data.class_assignment, params.classes);
            Ok(make_portfolio_problem(
                &data.mu,
                data.sigma.clone(),
                params.target_return,
                &data.class_assignment,
                &alloc,
            )?)
        }
        other => Err(SpecError::Usage(format!(
            "unknown builtin problem '{other}' (expected exp1-structured, exp1-random, exp2, pagerank-demo, dual-ridge-synth, portfolio-synth)"
        ))),
    }
}

/// Replaces the smoothness bound per the CLI choice.
pub fn apply_smoothness_choice(
    problem: ConstrainedProblem,
    choice: &str,
) -> Result<ConstrainedProblem, SpecError> {
    match choice {
        "full" => Ok(problem),
        "scaled-identity" => {
            let h = problem
                .objective
                .hessian()
                .ok_or_else(|| {
                    SpecError::Usage(
                        "scaled-identity smoothness needs a quadratic objective".into(),
                    )
                })?
                .clone();
            let lambda = h.lambda_max().map_err(|e| SpecError::Usage(e.to_string()))?;
            let n = problem.n;
            Ok(problem.with_smoothness(SmoothnessSpec::scaled_identity(n, lambda)))
        }
        "per-sketch" => {
            let h = problem
                .objective
                .hessian()
                .ok_or_else(|| {
                    SpecError::Usage("per-sketch smoothness needs a quadratic objective".into())
                })?
                .clone();
            Ok(problem.with_smoothness(SmoothnessSpec::PerSketch(h)))
        }
        other => Err(SpecError::Usage(format!(
            "unknown smoothness choice '{other}' (expected full, scaled-identity, per-sketch)"
        ))),
    }
}

/// Builds a sketch distribution from its CLI name.
pub fn resolve_sketch(
    kind: &str,
    p: Option<usize>,
    problem: &ConstrainedProblem,
    seed: u64,
) -> Result<SketchDistribution, SpecError> {
    let n = problem.n;
    let need_p = || {
        p.ok_or_else(|| SpecError::Usage(format!("sketch kind '{kind}' needs --p")))
    };
    let kind = match kind {
        "fixed-pairs" => SketchKind::FixedPartitionPairs {
            mode: PartitionMode::Cyclic,
        },
        "fixed-pairs-uniform" => SketchKind::FixedPartitionPairs {
            mode: PartitionMode::Uniform,
        },
        "random-pairs" => SketchKind::RandomTuples { p: 2 },
        "random-tuples" => SketchKind::RandomTuples { p: need_p()? },
        "lipschitz-pairs" => {
            // Weights from the diagonal of the curvature bound when present.
            let weights = match problem.smoothness.fixed() {
                Some(m) => {
                    let dense = m.to_dense();
                    (0..n).map(|i| dense[(i, i)].max(1e-12)).collect()
                }
                None => vec![1.0; n],
            };
            SketchKind::LipschitzWeightedPairs { lipschitz: weights }
        }
        "kernel-blocks" => SketchKind::KernelBasisBlocks { p: need_p()? },
        "gaussian" => SketchKind::GaussianDense { p: need_p()? },
        "uniform" => SketchKind::UniformDense { p: need_p()? },
        other => Err(SpecError::Usage(format!(
            "unknown sketch kind '{other}' (expected fixed-pairs, fixed-pairs-uniform, random-pairs, random-tuples, lipschitz-pairs, kernel-blocks, gaussian, uniform)"
        )))?,
    };
    Ok(SketchDistribution::new(kind, n, seed, Some(&problem.a))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_problems_build_and_validate() {
        let params = BuiltinParams {
            n: 24,
            classes: 3,
            ..Default::default()
        };
        for name in [
            "exp1-structured",
            "exp1-random",
            "exp2",
            "pagerank-demo",
            "dual-ridge-synth",
            "portfolio-synth",
        ] {
            let p = builtin_problem(name, &params).unwrap();
            p.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn unknown_names_are_usage_errors() {
        assert!(matches!(
            builtin_problem("nope", &BuiltinParams::default()),
            Err(SpecError::Usage(_))
        ));
        let p = builtin_problem("exp2", &BuiltinParams { n: 8, ..Default::default() }).unwrap();
        assert!(matches!(
            resolve_sketch("nope", None, &p, 0),
            Err(SpecError::Usage(_))
        ));
        assert!(matches!(
            resolve_sketch("gaussian", None, &p, 0),
            Err(SpecError::Usage(_))
        ));
    }

    #[test]
    fn smoothness_choices_swap_the_bound() {
        let p = builtin_problem("exp2", &BuiltinParams { n: 8, delta: 0.5, ..Default::default() })
            .unwrap();
        let scaled = apply_smoothness_choice(p.clone(), "scaled-identity").unwrap();
        let m = scaled.smoothness.fixed().unwrap();
        // λ_max(B) = δ + (1−δ)n = 0.5 + 0.5·8 = 4.5.
        assert!((m.lambda_max().unwrap() - 4.5).abs() < 1e-12);
        let per = apply_smoothness_choice(p, "per-sketch").unwrap();
        assert!(per.smoothness.fixed().is_none());
    }
}
