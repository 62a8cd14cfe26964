//! Constrained problem instances: an objective oracle, the constraint pair
//! (A, b), curvature data, and a feasible starting point.

mod builtin;
pub mod io;

pub use builtin::{
    make_dual_erm_problem, make_exp1_problem, make_exp2_problem, make_pagerank_problem,
    make_portfolio_problem, pagerank_incidence_from_edges, proportional_allocations,
    synth_portfolio_data, Exp1Variant, LossKind, PortfolioData,
};

use crate::forms::{SmoothnessSpec, SymmetricForm};
use crate::linalg::{
    kernel_basis, pseudo_inverse, pseudo_inverse_symmetric, DenseMatrix, LinalgError,
    DEFAULT_RANK_TOL,
};
use crate::vecops;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("invalid problem configuration: {0}")]
    InvalidConfig(String),
    #[error("graph column {0} has no outgoing edges")]
    DanglingNode(usize),
    #[error("loss {0:?} has a non-smooth conjugate and is not supported")]
    UnsupportedLoss(LossKind),
    #[error("constraint system is infeasible: least-norm residual {residual:.3e}")]
    Infeasible { residual: f64 },
    #[error("starting point violates the constraints: ‖Ax⁰−b‖∞ = {residual:.3e}")]
    InfeasibleStart { residual: f64 },
    #[error("curvature bound is not positive semidefinite (min eigenvalue {min:.3e})")]
    IndefiniteCurvature { min: f64 },
    #[error("i/o failure: {0}")]
    Io(String),
    #[error("parse failure: {0}")]
    Parse(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// A smooth objective supplied through value/gradient oracles.
pub trait ObjectiveOracle: Send + Sync {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
}

/// The objective function of a constrained problem.
#[derive(Clone)]
pub enum Objective {
    /// f(x) = ½ xᵀHx + cᵀx + d.
    Quadratic {
        hessian: SymmetricForm,
        linear: Vec<f64>,
        offset: f64,
    },
    /// Arbitrary smooth oracle.
    Custom(Arc<dyn ObjectiveOracle>),
}

impl std::fmt::Debug for Objective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Objective::Quadratic { hessian, .. } => {
                write!(f, "Objective::Quadratic({} dims)", hessian.n())
            }
            Objective::Custom(_) => write!(f, "Objective::Custom"),
        }
    }
}

impl Objective {
    pub fn quadratic(hessian: SymmetricForm, linear: Vec<f64>, offset: f64) -> Self {
        debug_assert_eq!(hessian.n(), linear.len());
        Objective::Quadratic {
            hessian,
            linear,
            offset,
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Objective::Quadratic {
                hessian,
                linear,
                offset,
            } => 0.5 * hessian.quad(x) + vecops::dot(linear, x) + offset,
            Objective::Custom(o) => o.value(x),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Objective::Quadratic {
                hessian, linear, ..
            } => {
                let mut g = hessian.matvec(x);
                vecops::axpy(1.0, linear, &mut g);
                g
            }
            Objective::Custom(o) => o.gradient(x),
        }
    }

    /// ∇f(a·xa + b·xb): the affine-combination oracle the sparse solvers
    /// lean on. Dense work happens here, on the oracle's side.
    pub fn gradient_at_combo(&self, a: f64, xa: &[f64], b: f64, xb: &[f64]) -> Vec<f64> {
        let combo = vecops::lincomb2(a, xa, b, xb);
        self.gradient(&combo)
    }

    /// The Hessian when the objective is quadratic.
    pub fn hessian(&self) -> Option<&SymmetricForm> {
        match self {
            Objective::Quadratic { hessian, .. } => Some(hessian),
            Objective::Custom(_) => None,
        }
    }
}

/// A smooth objective with multiple coupled linear equality constraints.
#[derive(Debug, Clone)]
pub struct ConstrainedProblem {
    pub n: usize,
    /// m×n constraint matrix.
    pub a: DenseMatrix,
    pub b: Vec<f64>,
    pub objective: Objective,
    /// Curvature upper bound used by the step operator.
    pub smoothness: SmoothnessSpec,
    /// Strong-convexity lower-bound matrix G, when one is known.
    pub strong_convexity: Option<SymmetricForm>,
    /// Optimal value, when known.
    pub f_star: Option<f64>,
    /// Feasible starting point.
    pub x0: Vec<f64>,
}

impl ConstrainedProblem {
    pub fn m(&self) -> usize {
        self.a.rows()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.objective.value(x)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.objective.gradient(x)
    }

    /// ‖Ax − b‖∞.
    pub fn feasibility_residual(&self, x: &[f64]) -> f64 {
        let ax = self.a.matvec(x);
        ax.iter()
            .zip(&self.b)
            .fold(0.0f64, |m, (axi, bi)| m.max((axi - bi).abs()))
    }

    /// Swaps in a different smoothness bound (used by the experiment grids).
    pub fn with_smoothness(mut self, smoothness: SmoothnessSpec) -> Self {
        self.smoothness = smoothness;
        self
    }

    /// Structural validation: shapes, finiteness, feasibility of x⁰, and
    /// positive semidefiniteness of the curvature bound.
    pub fn validate(&self) -> Result<(), ProblemError> {
        if self.a.cols() != self.n || self.b.len() != self.a.rows() || self.x0.len() != self.n {
            return Err(ProblemError::InvalidConfig(format!(
                "inconsistent shapes: n={}, A is {}x{}, b has {}, x0 has {}",
                self.n,
                self.a.rows(),
                self.a.cols(),
                self.b.len(),
                self.x0.len()
            )));
        }
        if !self.a.is_finite()
            || self.b.iter().any(|v| !v.is_finite())
            || self.x0.iter().any(|v| !v.is_finite())
        {
            return Err(ProblemError::InvalidConfig(
                "constraints or starting point contain non-finite entries".into(),
            ));
        }
        let b_scale = 1.0 + self.b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let residual = self.feasibility_residual(&self.x0);
        if residual > 1e-10 * b_scale {
            return Err(ProblemError::InfeasibleStart { residual });
        }
        if let Some(m) = self.smoothness.fixed() {
            let min = m.lambda_min()?;
            let scale = m.lambda_max()?.abs().max(1.0);
            if min < -1e-8 * scale {
                return Err(ProblemError::IndefiniteCurvature { min });
            }
        }
        Ok(())
    }

    /// Least-norm particular solution x = A†b of the constraints.
    pub fn least_norm_feasible(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>, ProblemError> {
        let pinv = pseudo_inverse(a, DEFAULT_RANK_TOL)?;
        let x = pinv.apply(b);
        let ax = a.matvec(&x);
        let residual = ax
            .iter()
            .zip(b)
            .fold(0.0f64, |m, (axi, bi)| m.max((axi - bi).abs()));
        let scale = 1.0 + b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if residual > 1e-8 * scale {
            return Err(ProblemError::Infeasible { residual });
        }
        Ok(x)
    }

    /// For quadratic objectives: the constrained minimizer through a
    /// kernel-reduced solve, x* = x_p + U w with (UᵀHU) w = −Uᵀ∇f(x_p).
    /// Doubles as the stationarity oracle: the returned multiplier residual
    /// is ‖∇f(x*) + Aᵀλ*‖∞.
    pub fn solve_known_optimum(&self) -> Result<KnownOptimum, ProblemError> {
        let hessian = self.objective.hessian().ok_or_else(|| {
            ProblemError::InvalidConfig("known-optimum solve needs a quadratic objective".into())
        })?;
        let x_p = Self::least_norm_feasible(&self.a, &self.b)?;
        let kernel = kernel_basis(&self.a, DEFAULT_RANK_TOL)?;
        let x_star = if kernel.dim() == 0 {
            x_p
        } else {
            let grad_p = self.gradient(&x_p);
            let rhs: Vec<f64> = kernel
                .project_coords(&grad_p)
                .iter()
                .map(|v| -v)
                .collect();
            let h_r = {
                let d = kernel.dim();
                let mut hu = DenseMatrix::zeros(self.n, d);
                for j in 0..d {
                    let col = kernel.columns().col(j);
                    hu.set_col(j, &hessian.matvec(&col));
                }
                kernel.columns().transpose().matmul(&hu)
            };
            let w = pseudo_inverse_symmetric(&h_r, DEFAULT_RANK_TOL)?.apply(&rhs);
            let mut x = x_p;
            let lifted = kernel.lift(&w);
            vecops::axpy(1.0, &lifted, &mut x);
            x
        };
        let f_star = self.value(&x_star);
        // λ* from least squares on ∇f(x*) + Aᵀλ = 0.
        let grad = self.gradient(&x_star);
        let neg_grad: Vec<f64> = grad.iter().map(|v| -v).collect();
        let at = self.a.transpose();
        let lambda = pseudo_inverse(&at, DEFAULT_RANK_TOL)?.apply(&neg_grad);
        let mut stationarity = self.a.tr_matvec(&lambda);
        vecops::axpy(1.0, &grad, &mut stationarity);
        let residual = stationarity.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Ok(KnownOptimum {
            x_star,
            f_star,
            multiplier: lambda,
            stationarity_residual: residual,
        })
    }

    /// Computes and stores f* for quadratic objectives.
    pub fn with_computed_optimum(mut self) -> Result<Self, ProblemError> {
        let opt = self.solve_known_optimum()?;
        self.f_star = Some(opt.f_star);
        Ok(self)
    }
}

/// Result of the direct constrained solve.
#[derive(Debug, Clone)]
pub struct KnownOptimum {
    pub x_star: Vec<f64>,
    pub f_star: f64,
    pub multiplier: Vec<f64>,
    /// ‖∇f(x*) + Aᵀλ*‖∞.
    pub stationarity_residual: f64,
}
