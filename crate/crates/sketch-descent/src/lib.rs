//! Randomized sketch descent for smooth optimization under multiple coupled
//! linear equality constraints.
//!
//! The library solves `min f(x) s.t. Ax = b` by drawing a random sketch
//! matrix `S ∈ ℝ^{n×p}` each iteration and stepping inside `range(S) ∩ ker(A)`
//! through the operator
//!
//! ```text
//! Z_S = S P_S (P_Sᵀ Sᵀ M S P_S)† P_Sᵀ Sᵀ,   P_S = I_p − (AS)†(AS),
//! ```
//!
//! where `M` is a quadratic upper bound on the curvature of `f`. Identity
//! column sketches recover constrained coordinate descent; dense Gaussian
//! sketches mix all coordinates. Both a plain descent iteration and an
//! accelerated one (with sparse-update variants that avoid full-vector work)
//! are provided, together with the diagnostics that govern their rates:
//! the expected operator `Z = E[Z_S]`, the strong-convexity constant `σ_Z`
//! and the second-moment constant `ν_max`.
//!
//! Modules:
//! - [`linalg`]: dense kernels (symmetric eigendecomposition, Jacobi SVD,
//!   pseudo-inverse, null-space bases, generalized eigenvalue extremes).
//! - [`sketch`]: sketch distributions, sampling, support enumeration and the
//!   sampling validity checks.
//! - [`forms`]: structured symmetric matrices used for curvature data.
//! - [`operators`]: the per-sample step operator, the expected operator and
//!   convergence constants.
//! - [`problems`]: built-in constrained problem instances and file ingestion.
//! - [`solvers`]: the descent/accelerated iterations and the run driver.

pub mod forms;
pub mod linalg;
pub mod operators;
pub mod problems;
pub mod sketch;
pub mod solvers;
pub mod trace;
pub mod vecops;

pub use forms::{SmoothnessSpec, SymmetricForm};
pub use linalg::{
    generalized_eig_extremes, kernel_basis, pseudo_inverse, pseudo_inverse_symmetric, DenseMatrix,
    LinalgError, PseudoInverseFactors, SubspaceBasis,
};
pub use operators::{
    build_sketch_operator, AssumptionZReport, ConvergenceConstants, EstimationMode,
    ExpectedOperator, OperatorError, SketchOperator,
};
pub use problems::{ConstrainedProblem, Objective, ProblemError};
pub use sketch::{SketchDistribution, SketchError, SketchKind, SketchSample};
pub use solvers::{run, Algorithm, GapStop, SolverConfig, SolverError};
pub use trace::{aggregate, AggregateTrace, RunTrace, StopReason, TraceRow};
