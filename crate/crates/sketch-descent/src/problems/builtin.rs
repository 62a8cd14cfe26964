//! Built-in problem instances: the two benchmark quadratics, page ranking,
//! the dual of ridge-regression training, and mean-variance portfolio
//! selection with class-allocation rows.

use super::{ConstrainedProblem, Objective, ProblemError};
use crate::forms::{SmoothnessSpec, SymmetricForm};
use crate::linalg::{symmetric_eigen, DenseMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;

/// Which of the two benchmark quadratics to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exp1Variant {
    /// f(x) = xᵀ(I + (1−δ)(e₁e_nᵀ + e_n e₁ᵀ))x subject to eᵀx = 0.
    Structured,
    /// f(x) = ½xᵀMx with M = M₀ + δI, M₀ a random rank-deficient PSD
    /// matrix; x⁰ is the top eigenvector and the constraint row is the
    /// second eigenvector.
    RandomRankDeficient,
}

/// Losses of the regularization-free training problem. Only losses with a
/// smooth conjugate are runnable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Ridge,
    Svm,
    AbsoluteValue,
    SupportVectorRegression,
}

/// A deterministic feasible start for sum-zero constraints: a ramp vector
/// re-centered to the zero-sum hyperplane, scaled so the initial objective
/// gap is exactly the requested value (the optimum of these problems is 0).
fn ramp_start(n: usize, objective: &Objective, target_gap: f64) -> Vec<f64> {
    let mut x: Vec<f64> = (0..n).map(|i| (i + 1) as f64).collect();
    for _ in 0..2 {
        let mean = x.iter().sum::<f64>() / n as f64;
        for v in x.iter_mut() {
            *v -= mean;
        }
    }
    let f = objective.value(&x);
    if f > 1e-300 {
        let c = (target_gap / f).sqrt();
        for v in x.iter_mut() {
            *v *= c;
        }
    }
    x
}

/// Builds one of the two benchmark quadratics. Both have x* = 0, f* = 0.
pub fn make_exp1_problem(
    n: usize,
    delta: f64,
    variant: Exp1Variant,
    seed: u64,
) -> Result<ConstrainedProblem, ProblemError> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(ProblemError::InvalidConfig(format!(
            "delta must lie in [0, 1], got {delta}"
        )));
    }
    if n < 3 {
        return Err(ProblemError::InvalidConfig(
            "benchmark problems need n >= 3".into(),
        ));
    }
    match variant {
        Exp1Variant::Structured => {
            // Hessian of xᵀ(I + (1−δ)(e₁e_nᵀ + e_n e₁ᵀ))x.
            let hessian = SymmetricForm::RankTwoCross {
                n,
                base: 2.0,
                coeff: 2.0 * (1.0 - delta),
                i: 0,
                j: n - 1,
            };
            let objective = Objective::quadratic(hessian.clone(), vec![0.0; n], 0.0);
            let x0 = ramp_start(n, &objective, 1.0);
            Ok(ConstrainedProblem {
                n,
                a: DenseMatrix::from_rows(&[vec![1.0; n]])?,
                b: vec![0.0],
                smoothness: SmoothnessSpec::Fixed(hessian.clone()),
                strong_convexity: Some(hessian),
                objective,
                f_star: Some(0.0),
                x0,
            })
        }
        Exp1Variant::RandomRankDeficient => {
            let rank = (n / 5).max(2);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let scale = 1.0 / (n as f64).sqrt();
            let factor = DenseMatrix::from_fn(rank, n, |_, _| scale * normal(&mut rng));
            let hessian = SymmetricForm::Factored {
                factor,
                ridge: delta,
            };
            let eig = symmetric_eigen(&hessian.to_dense())?;
            // Eigenvalues ascend: the top eigenvector is last.
            let v1 = eig.vectors.col(n - 1);
            let v2 = eig.vectors.col(n - 2);
            let objective = Objective::quadratic(hessian.clone(), vec![0.0; n], 0.0);
            Ok(ConstrainedProblem {
                n,
                a: DenseMatrix::from_rows(&[v2])?,
                b: vec![0.0],
                smoothness: SmoothnessSpec::Fixed(hessian.clone()),
                strong_convexity: Some(hessian),
                objective,
                f_star: Some(0.0),
                x0: v1,
            })
        }
    }
}

/// The spread quadratic f(x) = ½xᵀBx with B = δI + (1−δ)eeᵀ subject to
/// eᵀx = 0. The Hessian B is exposed through the objective so the harness
/// can derive the alternative curvature bounds λ_max(B)·I and the
/// per-sketch rule from it.
pub fn make_exp2_problem(n: usize, delta: f64) -> Result<ConstrainedProblem, ProblemError> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(ProblemError::InvalidConfig(format!(
            "delta must lie in [0, 1], got {delta}"
        )));
    }
    if n < 2 {
        return Err(ProblemError::InvalidConfig("need n >= 2".into()));
    }
    let b_form = SymmetricForm::SpreadPlusRankOne {
        n,
        diag: delta,
        outer: 1.0 - delta,
    };
    let objective = Objective::quadratic(b_form.clone(), vec![0.0; n], 0.0);
    let x0 = ramp_start(n, &objective, 1.0);
    Ok(ConstrainedProblem {
        n,
        a: DenseMatrix::from_rows(&[vec![1.0; n]])?,
        b: vec![0.0],
        smoothness: SmoothnessSpec::Fixed(b_form.clone()),
        strong_convexity: Some(b_form),
        objective,
        f_star: Some(0.0),
        x0,
    })
}

/// Page ranking as ½‖Ex − x‖² subject to eᵀx = 1, where E column-normalizes
/// the incidence matrix. Every column of the incidence matrix must have a
/// positive sum (no dangling nodes).
pub fn make_pagerank_problem(incidence: &DenseMatrix) -> Result<ConstrainedProblem, ProblemError> {
    let n = incidence.rows();
    if incidence.cols() != n {
        return Err(ProblemError::InvalidConfig(format!(
            "incidence matrix must be square, got {}x{}",
            incidence.rows(),
            incidence.cols()
        )));
    }
    if incidence.data().iter().any(|&v| v < 0.0) {
        return Err(ProblemError::InvalidConfig(
            "incidence entries must be nonnegative".into(),
        ));
    }
    // E = Ē diag(Ēᵀe)⁻¹: divide each column by its sum.
    let mut col_sums = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            col_sums[j] += incidence[(i, j)];
        }
    }
    if let Some(j) = col_sums.iter().position(|&s| s <= 0.0) {
        return Err(ProblemError::DanglingNode(j));
    }
    let mut e_minus_i = DenseMatrix::from_fn(n, n, |i, j| incidence[(i, j)] / col_sums[j]);
    for i in 0..n {
        e_minus_i[(i, i)] -= 1.0;
    }
    let hessian = SymmetricForm::Factored {
        factor: e_minus_i,
        ridge: 0.0,
    };
    let objective = Objective::quadratic(hessian.clone(), vec![0.0; n], 0.0);
    let x0 = vec![1.0 / n as f64; n];
    let problem = ConstrainedProblem {
        n,
        a: DenseMatrix::from_rows(&[vec![1.0; n]])?,
        b: vec![1.0],
        smoothness: SmoothnessSpec::Fixed(hessian),
        strong_convexity: None,
        objective,
        f_star: None,
        x0,
    };
    problem.with_computed_optimum()
}

/// Incidence matrix from a directed edge list (`from → to`).
pub fn pagerank_incidence_from_edges(n: usize, edges: &[(usize, usize)]) -> DenseMatrix {
    let mut m = DenseMatrix::zeros(n, n);
    for &(from, to) in edges {
        m[(to, from)] += 1.0;
    }
    m
}

/// Dual of unregularized loss minimization: (1/n) Σ φ*_i(x_i) subject to
/// Ax = 0 with A the feature matrix. Only the ridge loss, whose conjugate is
/// φ*(s) = s²/4 + y·s, is smooth.
pub fn make_dual_erm_problem(
    features: &DenseMatrix,
    labels: &[f64],
    loss: LossKind,
) -> Result<ConstrainedProblem, ProblemError> {
    if loss != LossKind::Ridge {
        return Err(ProblemError::UnsupportedLoss(loss));
    }
    let n = features.cols();
    if labels.len() != n {
        return Err(ProblemError::InvalidConfig(format!(
            "need one label per training point: {} features columns, {} labels",
            n,
            labels.len()
        )));
    }
    let inv_n = 1.0 / n as f64;
    let hessian = SymmetricForm::Diagonal(vec![0.5 * inv_n; n]);
    let linear: Vec<f64> = labels.iter().map(|y| y * inv_n).collect();
    let objective = Objective::quadratic(hessian.clone(), linear, 0.0);
    let problem = ConstrainedProblem {
        n,
        a: features.clone(),
        b: vec![0.0; features.rows()],
        smoothness: SmoothnessSpec::Fixed(hessian.clone()),
        strong_convexity: Some(hessian),
        objective,
        f_star: None,
        // A·0 = 0 is always feasible for the homogeneous constraint.
        x0: vec![0.0; n],
    };
    problem.with_computed_optimum()
}

/// Mean-variance portfolio selection with class-allocation rows:
/// min xᵀΣx subject to eᵀx = 1, μᵀx = r, and one allocation row per class,
/// giving m = C + 2 stacked constraints.
pub fn make_portfolio_problem(
    mu: &[f64],
    sigma: SymmetricForm,
    target_return: f64,
    class_assignment: &[usize],
    class_allocations: &[f64],
) -> Result<ConstrainedProblem, ProblemError> {
    let n = mu.len();
    if sigma.n() != n {
        return Err(ProblemError::InvalidConfig(format!(
            "covariance is {}x{0} but there are {n} assets",
            sigma.n()
        )));
    }
    let min_eig = sigma.lambda_min()?;
    if min_eig < -1e-8 * sigma.lambda_max()?.abs().max(1.0) {
        return Err(ProblemError::IndefiniteCurvature { min: min_eig });
    }
    let c_classes = class_allocations.len();
    if c_classes > 0 {
        if class_assignment.len() != n {
            return Err(ProblemError::InvalidConfig(
                "class assignment must cover every asset".into(),
            ));
        }
        if class_assignment.iter().any(|&c| c >= c_classes) {
            return Err(ProblemError::InvalidConfig(
                "class id out of range".into(),
            ));
        }
        let total: f64 = class_allocations.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(ProblemError::InvalidConfig(format!(
                "class allocations must sum to 1 (consistency with the budget row), got {total}"
            )));
        }
    }

    // Rows: budget, return, then one indicator row per class.
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(c_classes + 2);
    rows.push(vec![1.0; n]);
    rows.push(mu.to_vec());
    let mut b = vec![1.0, target_return];
    for (c, &alloc) in class_allocations.iter().enumerate() {
        let row: Vec<f64> = (0..n)
            .map(|i| if class_assignment[i] == c { 1.0 } else { 0.0 })
            .collect();
        rows.push(row);
        b.push(alloc);
    }
    let a = DenseMatrix::from_rows(&rows)?;
    let x0 = ConstrainedProblem::least_norm_feasible(&a, &b)?;

    let hessian = sigma.scaled(2.0);
    let objective = Objective::quadratic(hessian.clone(), vec![0.0; n], 0.0);
    Ok(ConstrainedProblem {
        n,
        a,
        b,
        smoothness: SmoothnessSpec::Fixed(hessian.clone()),
        strong_convexity: Some(hessian),
        objective,
        f_star: None,
        x0,
    })
}

/// Synthetic market data standing in for historical estimates.
#[derive(Debug, Clone)]
pub struct PortfolioData {
    pub mu: Vec<f64>,
    /// Factor-model covariance Σ = FᵀF + εI, kept factored.
    pub sigma: SymmetricForm,
    pub class_assignment: Vec<usize>,
}

/// Generates a factor-model covariance (k = max(2, n/10) factors, ridge
/// 1e-3), expected returns uniform in [0, 0.1], and round-robin class
/// membership. Deterministic under the seed.
pub fn synth_portfolio_data(n: usize, c_classes: usize, seed: u64) -> PortfolioData {
    assert!(c_classes >= 1 && n >= c_classes, "need n >= C >= 1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = (n / 10).max(2);
    let scale = 1.0 / (n as f64).sqrt();
    let factor = DenseMatrix::from_fn(k, n, |_, _| scale * normal(&mut rng));
    let mu: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..0.1)).collect();
    let class_assignment: Vec<usize> = (0..n).map(|i| i % c_classes).collect();
    PortfolioData {
        mu,
        sigma: SymmetricForm::Factored {
            factor,
            ridge: 1e-3,
        },
        class_assignment,
    }
}

/// Proportional class-allocation targets a_c = |class c| / n.
pub fn proportional_allocations(class_assignment: &[usize], c_classes: usize) -> Vec<f64> {
    let n = class_assignment.len() as f64;
    let mut alloc = vec![0.0; c_classes];
    for &c in class_assignment {
        alloc[c] += 1.0 / n;
    }
    alloc
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = loop {
        let u: f64 = rng.gen();
        if u > 0.0 {
            break u;
        }
    };
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
}
