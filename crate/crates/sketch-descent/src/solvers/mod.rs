//! The solver iterations and the run driver.
//!
//! Four engines share the sampled step operator:
//! - plain descent: x ← x − Z_S ∇f(x);
//! - accelerated descent over (x, v, y) with an (α, β, γ) schedule;
//! - two sparse reformulations of the accelerated iteration that track
//!   (u, w, B₂ₓ₂) or (u, v, b) so that, between recording points, no dense
//!   vector operation happens outside the gradient oracle.
//!
//! Every iterate of every engine stays feasible: each move is a combination
//! of feasible points plus directions from range(Z_S) ⊆ ker(A).

mod schedule;

pub use schedule::{gamma_schedule, Schedule, ScheduleKind, StepParams};

use crate::linalg::LinalgError;
use crate::operators::{build_sketch_operator, ExpectedOperator, OperatorError, SketchOperator};
use crate::problems::{ConstrainedProblem, ProblemError};
use crate::sketch::{SketchDistribution, SketchKind, SketchSample};
use crate::trace::{RunTrace, StopReason, TraceRow};
use crate::vecops;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("{algorithm:?} needs the parameter {name}")]
    MissingParam {
        algorithm: Algorithm,
        name: &'static str,
    },
    #[error("objective diverged at iteration {k}: f = {f:.6e} from f(x0) = {f0:.6e}; the curvature bound is likely violated")]
    Divergence { k: u64, f: f64, f0: f64 },
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Rsd,
    ArsdConvex,
    ArsdStronglyConvex,
    ArsdEfficientConvex,
    ArsdEfficientStronglyConvex,
}

impl Algorithm {
    pub fn needs_nu(self) -> bool {
        self != Algorithm::Rsd
    }

    pub fn needs_sigma(self) -> bool {
        matches!(
            self,
            Algorithm::ArsdStronglyConvex | Algorithm::ArsdEfficientStronglyConvex
        )
    }

    pub fn is_sparse_reformulation(self) -> bool {
        matches!(
            self,
            Algorithm::ArsdEfficientConvex | Algorithm::ArsdEfficientStronglyConvex
        )
    }
}

/// Early stop on the gap to a known optimal value, checked each iteration
/// for the dense engines and at recording points for the sparse ones.
#[derive(Debug, Clone, Copy)]
pub struct GapStop {
    pub f_star: f64,
    pub tol: f64,
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    pub max_iters: u64,
    pub seed: u64,
    /// Second-moment constant for the accelerated variants; any value
    /// ≥ ν_max keeps the rate guarantees. Values below ν_max still run.
    pub nu: Option<f64>,
    /// Strong-convexity constant for the strongly convex variants.
    pub sigma: Option<f64>,
    pub record_every: u64,
    /// Stop once the recorded optimality measure drops below this.
    pub stop_tolerance: Option<f64>,
    pub gap_stop: Option<GapStop>,
    /// Measure per-iteration wall time into the trace. Off by default so
    /// identical runs produce byte-identical artifacts.
    pub timing: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Rsd,
            max_iters: 1000,
            seed: 0,
            nu: None,
            sigma: None,
            record_every: 1,
            stop_tolerance: None,
            gap_stop: None,
            timing: false,
        }
    }
}

/// Iterate bundle of the plain descent iteration.
#[derive(Debug, Clone)]
pub struct RsdState {
    pub x: Vec<f64>,
    pub k: u64,
    pub zero_steps: u64,
}

impl RsdState {
    pub fn new(x0: Vec<f64>) -> Self {
        Self {
            x: x0,
            k: 0,
            zero_steps: 0,
        }
    }
}

fn sample_operator(
    problem: &ConstrainedProblem,
    dist: &mut SketchDistribution,
) -> Result<(SketchSample, SketchOperator), SolverError> {
    let s = dist.sample();
    let op = build_sketch_operator(&s, &problem.a, &problem.smoothness)?;
    Ok((s, op))
}

/// One step x ← x − Z_S ∇f(x). Returns true when the sampled operator was
/// null and the iterate did not move.
pub fn rsd_step(
    state: &mut RsdState,
    problem: &ConstrainedProblem,
    dist: &mut SketchDistribution,
) -> Result<bool, SolverError> {
    let grad = {
        let _oracle = vecops::pause_dense_ops();
        problem.gradient(&state.x)
    };
    let (s, op) = sample_operator(problem, dist)?;
    let w = op.compressed_apply(&grad);
    let zero = w.iter().all(|v| *v == 0.0);
    if !zero {
        let neg: Vec<f64> = w.iter().map(|v| -v).collect();
        s.scatter_add(&neg, &mut state.x);
    } else {
        state.zero_steps += 1;
    }
    state.k += 1;
    Ok(zero)
}

/// Iterate bundle of the accelerated iteration in general (dense) form.
#[derive(Debug, Clone)]
pub struct ArsdGeneralState {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    /// The interpolation point of the last completed step.
    pub y: Vec<f64>,
    pub k: u64,
    pub zero_steps: u64,
}

impl ArsdGeneralState {
    pub fn new(x0: Vec<f64>) -> Self {
        Self {
            v: x0.clone(),
            y: x0.clone(),
            x: x0,
            k: 0,
            zero_steps: 0,
        }
    }
}

/// One accelerated step: y = αv + (1−α)x, x⁺ = y − Z_S∇f(y),
/// v⁺ = βv + (1−β)y − γ Z_S∇f(y).
pub fn arsd_step_general(
    state: &mut ArsdGeneralState,
    problem: &ConstrainedProblem,
    dist: &mut SketchDistribution,
    schedule: &mut Schedule,
) -> Result<bool, SolverError> {
    let StepParams { alpha, beta, gamma } = schedule.current();
    let y = vecops::lincomb2(alpha, &state.v, 1.0 - alpha, &state.x);
    let grad = {
        let _oracle = vecops::pause_dense_ops();
        problem.gradient(&y)
    };
    let (s, op) = sample_operator(problem, dist)?;
    let w = op.compressed_apply(&grad);
    let zero = w.iter().all(|v| *v == 0.0);

    let mut x_new = y.clone();
    let mut v_new = vecops::lincomb2(beta, &state.v, 1.0 - beta, &y);
    if !zero {
        let neg: Vec<f64> = w.iter().map(|v| -v).collect();
        s.scatter_add(&neg, &mut x_new);
        let neg_gamma: Vec<f64> = w.iter().map(|v| -gamma * v).collect();
        s.scatter_add(&neg_gamma, &mut v_new);
    } else {
        state.zero_steps += 1;
    }
    state.x = x_new;
    state.v = v_new;
    state.y = y;
    state.k += 1;
    schedule.advance();
    Ok(zero)
}

/// Condition threshold that triggers re-basing of the 2×2 recursion. The
/// determinant of the basis decays geometrically, and reconstruction drift
/// grows with the condition number; 1e6 keeps the drift near 1e-10 while
/// re-basing stays O(1) amortized.
const REBASE_COND: f64 = 1e6;
/// Scalar floor that triggers re-basing of the single-coefficient recursion.
const REBASE_FLOOR: f64 = 1e-300;

/// Iterate bundle of the sparse strongly convex reformulation: the pair
/// (y, v) is represented as B·(u, w) and never formed between recordings.
#[derive(Debug, Clone)]
pub struct ArsdEfficientScState {
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    /// B_k, row-major 2×2.
    pub basis: [[f64; 2]; 2],
    pub k: u64,
    pub zero_steps: u64,
    pub rebases: u64,
}

impl ArsdEfficientScState {
    pub fn new(x0: Vec<f64>) -> Self {
        Self {
            u: x0.clone(),
            w: x0,
            basis: [[1.0, 0.0], [0.0, 1.0]],
            k: 0,
            zero_steps: 0,
            rebases: 0,
        }
    }

    /// Reconstructs (y, v) densely.
    pub fn reconstruct(&self) -> (Vec<f64>, Vec<f64>) {
        let y = vecops::lincomb2(self.basis[0][0], &self.u, self.basis[0][1], &self.w);
        let v = vecops::lincomb2(self.basis[1][0], &self.u, self.basis[1][1], &self.w);
        (y, v)
    }
}

fn cond_2x2(b: &[[f64; 2]; 2]) -> f64 {
    let det = b[0][0] * b[1][1] - b[0][1] * b[1][0];
    if det == 0.0 {
        return f64::INFINITY;
    }
    let norm = b[0][0].abs() + b[0][1].abs() + b[1][0].abs() + b[1][1].abs();
    let inv_norm = (b[1][1].abs() + b[0][1].abs() + b[1][0].abs() + b[0][0].abs()) / det.abs();
    norm * inv_norm
}

/// One step of the strongly convex sparse reformulation. When `want_x` is
/// set (a recording boundary) the produced iterate x^{k+1} = y^k − Z_S∇f(y^k)
/// is reconstructed densely and returned.
pub fn arsd_step_efficient_sc(
    state: &mut ArsdEfficientScState,
    problem: &ConstrainedProblem,
    dist: &mut SketchDistribution,
    schedule: &mut Schedule,
    want_x: bool,
) -> Result<(Option<Vec<f64>>, bool), SolverError> {
    let StepParams { beta, gamma, .. } = schedule.current();
    let alpha_next = schedule.next_alpha();

    let grad = {
        let _oracle = vecops::pause_dense_ops();
        problem.objective.gradient_at_combo(
            state.basis[0][0],
            &state.u,
            state.basis[0][1],
            &state.w,
        )
    };
    let (s, op) = sample_operator(problem, dist)?;
    let wvec = op.compressed_apply(&grad);
    let zero = wvec.iter().all(|v| *v == 0.0);

    let x_next = if want_x {
        let mut x = vecops::lincomb2(state.basis[0][0], &state.u, state.basis[0][1], &state.w);
        if !zero {
            let neg: Vec<f64> = wvec.iter().map(|v| -v).collect();
            s.scatter_add(&neg, &mut x);
        }
        Some(x)
    } else {
        None
    };

    // B_{k+1} = A_k B_k with A_k = [[1−α₊β, α₊β], [1−β, β]].
    let a_k = [
        [1.0 - alpha_next * beta, alpha_next * beta],
        [1.0 - beta, beta],
    ];
    let mut b_old = state.basis;
    let mut b_new = mat2_mul(&a_k, &b_old);
    if cond_2x2(&b_new) > REBASE_COND {
        // Re-express the pair in a fresh basis before stepping further.
        // This is the documented amortized dense exception; it is tracked by
        // the rebase counter rather than the dense-op counter.
        let _rebase = vecops::pause_dense_ops();
        let (y, v) = state.reconstruct();
        state.u = y;
        state.w = v;
        b_old = [[1.0, 0.0], [0.0, 1.0]];
        b_new = a_k;
        state.rebases += 1;
    }
    let _ = b_old;

    if !zero {
        let det = b_new[0][0] * b_new[1][1] - b_new[0][1] * b_new[1][0];
        let inv = [
            [b_new[1][1] / det, -b_new[0][1] / det],
            [-b_new[1][0] / det, b_new[0][0] / det],
        ];
        let c1 = 1.0 - alpha_next * (1.0 - gamma);
        let c2 = gamma;
        let du_coef = inv[0][0] * c1 + inv[0][1] * c2;
        let dw_coef = inv[1][0] * c1 + inv[1][1] * c2;
        match &s {
            SketchSample::Columns {
                indices,
                basis: None,
                ..
            } => {
                for (j, &i) in indices.iter().enumerate() {
                    state.u[i] -= du_coef * wvec[j];
                    state.w[i] -= dw_coef * wvec[j];
                }
            }
            _ => {
                return Err(SolverError::InvalidConfig(
                    "the sparse reformulations need identity-column sketches".into(),
                ))
            }
        }
    } else {
        state.zero_steps += 1;
    }
    state.basis = b_new;
    state.k += 1;
    schedule.advance();
    Ok((x_next, zero))
}

fn mat2_mul(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}

/// Iterate bundle of the sparse convex reformulation (β = 1):
/// y^k = v^k + b_k u^k with v⁰ = x⁰, u⁰ = 0, b₀ = 1.
#[derive(Debug, Clone)]
pub struct ArsdEfficientCvxState {
    pub v: Vec<f64>,
    pub u: Vec<f64>,
    pub b: f64,
    pub k: u64,
    pub zero_steps: u64,
    pub rebases: u64,
}

impl ArsdEfficientCvxState {
    pub fn new(x0: Vec<f64>) -> Self {
        let n = x0.len();
        Self {
            v: x0,
            u: vec![0.0; n],
            b: 1.0,
            k: 0,
            zero_steps: 0,
            rebases: 0,
        }
    }

    pub fn reconstruct_y(&self) -> Vec<f64> {
        vecops::lincomb2(1.0, &self.v, self.b, &self.u)
    }
}

/// One step of the convex sparse reformulation:
/// v⁺ = v − γ g, u⁺ = u − ((1−γ)/b) g, b⁺ = (1−α_{k+1}) b with
/// g = Z_S∇f(v + b·u).
pub fn arsd_step_efficient_cvx(
    state: &mut ArsdEfficientCvxState,
    problem: &ConstrainedProblem,
    dist: &mut SketchDistribution,
    schedule: &mut Schedule,
    want_x: bool,
) -> Result<(Option<Vec<f64>>, bool), SolverError> {
    let StepParams { beta, gamma, .. } = schedule.current();
    if (beta - 1.0).abs() > 1e-14 {
        return Err(SolverError::InvalidConfig(
            "the convex reformulation needs the β = 1 schedule".into(),
        ));
    }
    let alpha_next = schedule.next_alpha();
    let grad = {
        let _oracle = vecops::pause_dense_ops();
        problem
            .objective
            .gradient_at_combo(1.0, &state.v, state.b, &state.u)
    };
    let (s, op) = sample_operator(problem, dist)?;
    let wvec = op.compressed_apply(&grad);
    let zero = wvec.iter().all(|v| *v == 0.0);

    let x_next = if want_x {
        let mut x = state.reconstruct_y();
        if !zero {
            let neg: Vec<f64> = wvec.iter().map(|v| -v).collect();
            s.scatter_add(&neg, &mut x);
        }
        Some(x)
    } else {
        None
    };

    if !zero {
        let u_coef = (1.0 - gamma) / state.b;
        match &s {
            SketchSample::Columns {
                indices,
                basis: None,
                ..
            } => {
                for (j, &i) in indices.iter().enumerate() {
                    state.v[i] -= gamma * wvec[j];
                    state.u[i] -= u_coef * wvec[j];
                }
            }
            _ => {
                return Err(SolverError::InvalidConfig(
                    "the sparse reformulations need identity-column sketches".into(),
                ))
            }
        }
    } else {
        state.zero_steps += 1;
    }
    state.b *= 1.0 - alpha_next;
    if state.b.abs() < REBASE_FLOOR {
        // Fold the scale back into u and restart the coefficient; dense work
        // tracked by the rebase counter.
        let _rebase = vecops::pause_dense_ops();
        let b = state.b;
        for ui in state.u.iter_mut() {
            *ui *= b;
        }
        state.b = 1.0;
        state.rebases += 1;
    }
    state.k += 1;
    schedule.advance();
    Ok((x_next, zero))
}

enum Engine {
    Rsd(RsdState),
    General(ArsdGeneralState, Schedule),
    EffSc(ArsdEfficientScState, Schedule),
    EffCvx(ArsdEfficientCvxState, Schedule),
}

impl Engine {
    fn step(
        &mut self,
        problem: &ConstrainedProblem,
        dist: &mut SketchDistribution,
        want_x: bool,
    ) -> Result<Option<Vec<f64>>, SolverError> {
        match self {
            Engine::Rsd(state) => {
                rsd_step(state, problem, dist)?;
                Ok(want_x.then(|| state.x.clone()))
            }
            Engine::General(state, schedule) => {
                arsd_step_general(state, problem, dist, schedule)?;
                Ok(want_x.then(|| state.x.clone()))
            }
            Engine::EffSc(state, schedule) => {
                let (x, _) = arsd_step_efficient_sc(state, problem, dist, schedule, want_x)?;
                Ok(x)
            }
            Engine::EffCvx(state, schedule) => {
                let (x, _) = arsd_step_efficient_cvx(state, problem, dist, schedule, want_x)?;
                Ok(x)
            }
        }
    }

    /// The current iterate when it is held densely (dense engines only).
    fn x_view(&self) -> Option<&[f64]> {
        match self {
            Engine::Rsd(state) => Some(&state.x),
            Engine::General(state, _) => Some(&state.x),
            _ => None,
        }
    }

    fn zero_steps(&self) -> u64 {
        match self {
            Engine::Rsd(s) => s.zero_steps,
            Engine::General(s, _) => s.zero_steps,
            Engine::EffSc(s, _) => s.zero_steps,
            Engine::EffCvx(s, _) => s.zero_steps,
        }
    }

    fn clamped(&self) -> bool {
        match self {
            Engine::Rsd(_) => false,
            Engine::General(_, sch) | Engine::EffSc(_, sch) | Engine::EffCvx(_, sch) => {
                sch.was_clamped()
            }
        }
    }
}

fn build_engine(problem: &ConstrainedProblem, config: &SolverConfig) -> Result<Engine, SolverError> {
    let need = |p: Option<f64>, name: &'static str| {
        p.ok_or(SolverError::MissingParam {
            algorithm: config.algorithm,
            name,
        })
    };
    let x0 = problem.x0.clone();
    Ok(match config.algorithm {
        Algorithm::Rsd => Engine::Rsd(RsdState::new(x0)),
        Algorithm::ArsdConvex => Engine::General(
            ArsdGeneralState::new(x0),
            Schedule::new(ScheduleKind::Convex {
                nu: need(config.nu, "nu")?,
            })?,
        ),
        Algorithm::ArsdStronglyConvex => Engine::General(
            ArsdGeneralState::new(x0),
            Schedule::new(ScheduleKind::StronglyConvex {
                nu: need(config.nu, "nu")?,
                sigma: need(config.sigma, "sigma")?,
            })?,
        ),
        Algorithm::ArsdEfficientConvex => Engine::EffCvx(
            ArsdEfficientCvxState::new(x0),
            Schedule::new(ScheduleKind::Convex {
                nu: need(config.nu, "nu")?,
            })?,
        ),
        Algorithm::ArsdEfficientStronglyConvex => Engine::EffSc(
            ArsdEfficientScState::new(x0),
            Schedule::new(ScheduleKind::StronglyConvex {
                nu: need(config.nu, "nu")?,
                sigma: need(config.sigma, "sigma")?,
            })?,
        ),
    })
}

/// Drives one solver over a problem, recording a trace. Deterministic under
/// the config seed: the sketch stream is re-derived from it, so the same
/// invocation yields an identical trace.
pub fn run(
    problem: &ConstrainedProblem,
    dist: &SketchDistribution,
    config: &SolverConfig,
    zop: Option<&ExpectedOperator>,
) -> Result<RunTrace, SolverError> {
    if config.record_every == 0 {
        return Err(SolverError::InvalidConfig(
            "record_every must be at least 1".into(),
        ));
    }
    if config.stop_tolerance.is_some() && zop.is_none() {
        return Err(SolverError::InvalidConfig(
            "the optimality-measure stop needs the expected operator".into(),
        ));
    }
    if config.algorithm.is_sparse_reformulation() {
        let coordinate_kind = matches!(
            dist.kind(),
            SketchKind::FixedPartitionPairs { .. }
                | SketchKind::RandomTuples { .. }
                | SketchKind::LipschitzWeightedPairs { .. }
        );
        if !coordinate_kind {
            return Err(SolverError::InvalidConfig(
                "the sparse reformulations need an identity-column sketch family".into(),
            ));
        }
    }

    let mut dist = dist.reseeded(config.seed);
    let mut engine = build_engine(problem, config)?;
    let f0 = problem.value(&problem.x0);
    let divergence_cap = 1e6 * (1.0 + f0.abs());
    let mut warnings = Vec::new();

    let mut trace = RunTrace::new();
    let record = |trace: &mut RunTrace, k: u64, x: &[f64], wall_ns: u64| {
        let f = problem.value(x);
        let feas = problem.feasibility_residual(x);
        let opt = zop.map(|z| {
            let grad = problem.gradient(x);
            z.optimality_measure(&grad)
        });
        trace.rows.push(TraceRow {
            k,
            f,
            feas_inf: feas,
            opt_measure: opt,
            wall_ns,
        });
        f
    };
    record(&mut trace, 0, &problem.x0, 0);

    let mut iter_ns_total: u64 = 0;
    let mut stop = StopReason::MaxIters;
    let mut k = 0u64;
    let per_iter_gap_check = config.gap_stop.is_some() && !config.algorithm.is_sparse_reformulation();

    while k < config.max_iters {
        let next_k = k + 1;
        let is_boundary = next_k % config.record_every == 0 || next_k == config.max_iters;
        let want_x = is_boundary || per_iter_gap_check;

        let t0 = config.timing.then(std::time::Instant::now);
        // Dense engines expose their iterate; only the sparse engines need
        // the step to hand one out.
        let x_from_step = engine.step(problem, &mut dist, want_x && engine.x_view().is_none())?;
        if let Some(t0) = t0 {
            iter_ns_total += t0.elapsed().as_nanos() as u64;
        }
        k = next_k;

        let mut stop_now = None;
        let mut recorded_f = None;
        if want_x {
            let x_owned;
            let x: &[f64] = match engine.x_view() {
                Some(view) => view,
                None => {
                    x_owned = x_from_step.expect("sparse engines return x when asked");
                    &x_owned
                }
            };
            if is_boundary {
                let f = record(&mut trace, k, x, iter_ns_total);
                recorded_f = Some(f);
                if !f.is_finite() || f.abs() > divergence_cap {
                    return Err(SolverError::Divergence { k, f, f0 });
                }
                if let (Some(tol), Some(row)) = (config.stop_tolerance, trace.rows.last()) {
                    if row.opt_measure.is_some_and(|m| m <= tol) {
                        stop_now = Some(StopReason::OptMeasure);
                    }
                }
            }
            if let Some(gap) = config.gap_stop {
                let f = match recorded_f {
                    Some(f) => f,
                    None => {
                        let _oracle = vecops::pause_dense_ops();
                        problem.value(x)
                    }
                };
                if f - gap.f_star <= gap.tol {
                    if !is_boundary {
                        record(&mut trace, k, x, iter_ns_total);
                    }
                    stop_now = Some(stop_now.unwrap_or(StopReason::Gap));
                }
            }
        }
        if let Some(reason) = stop_now {
            stop = reason;
            break;
        }
    }

    if engine.clamped() {
        warnings.push("momentum weight α was clamped to 1; supplied ν is likely below ν_max".into());
    }
    trace.iters = k;
    trace.stop = stop;
    trace.zero_steps = engine.zero_steps();
    trace.warnings = warnings;
    trace.mean_ns_per_iter = if config.timing && k > 0 {
        Some(iter_ns_total as f64 / k as f64)
    } else {
        None
    };
    Ok(trace)
}
