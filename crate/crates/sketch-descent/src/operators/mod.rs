//! The sketch step operator and its expectation.
//!
//! For a sample S, constraint matrix A and curvature bound M the step
//! operator is
//!
//! ```text
//! Z_S = S P_S (P_Sᵀ Sᵀ M S P_S)† P_Sᵀ Sᵀ,   P_S = I_p − (AS)†(AS).
//! ```
//!
//! Z_S is symmetric PSD, annihilates range(Aᵀ) and satisfies Z_S M Z_S = Z_S.
//! It is assembled from m×p and p×p pieces only and applied in factored form,
//! so per-iteration cost stays polynomial in (p, m) and linear in n; the n×n
//! matrix is materialized only for diagnostics and tests.

mod constants;
mod expected;

pub use constants::{ConstantsEstimate, ConvergenceConstants};
pub use expected::{AssumptionZReport, EstimationMode, ExpectedOperator, ZSource};

use crate::forms::SmoothnessSpec;
use crate::linalg::{
    pseudo_inverse, pseudo_inverse_from_eigen, symmetric_eigen, DenseMatrix, LinalgError,
    DEFAULT_RANK_TOL,
};
use crate::sketch::{SketchError, SketchSample};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("curvature matrix is not positive semidefinite (min eigenvalue {min:.3e})")]
    InvalidSmoothness { min: f64 },
    #[error("expected operator is not positive definite on ker(A) (min restricted eigenvalue {min:.3e})")]
    AssumptionViolated { min: f64 },
    #[error("argument lies outside ker(A): ‖Ax‖∞ = {residual:.3e}")]
    OutsideKernel { residual: f64 },
    #[error("exact expectations need an enumerable distribution")]
    NotEnumerable,
    #[error("convergence constants need a fixed smoothness matrix, not the per-sketch rule")]
    VariableSmoothness,
    #[error("constraint matrix has an empty kernel; the feasible set is a point")]
    EmptyKernel,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Sketch(#[from] SketchError),
}

/// Factored form of one step operator Z_S.
#[derive(Debug, Clone)]
pub struct SketchOperator {
    sample: SketchSample,
    /// Cached AS (m×p).
    a_s: DenseMatrix,
    /// P_S = I_p − (AS)†(AS), symmetric idempotent.
    projector: DenseMatrix,
    /// K = (P_Sᵀ SᵀMS P_S)†.
    inverse_core: DenseMatrix,
    /// P_S K P_S, the p×p core of Z_S = S · core · Sᵀ.
    core: DenseMatrix,
    rank: usize,
}

/// Builds the step operator at the default rank tolerance.
pub fn build_sketch_operator(
    s: &SketchSample,
    a: &DenseMatrix,
    smoothness: &SmoothnessSpec,
) -> Result<SketchOperator, OperatorError> {
    build_sketch_operator_with_tol(s, a, smoothness, DEFAULT_RANK_TOL)
}

/// Builds the step operator with an explicit pseudo-inverse rank cutoff.
/// The cutoff matters for degenerate sketches, where P_Sᵀ SᵀMS P_S is
/// numerically singular and decides whether a direction is usable.
pub fn build_sketch_operator_with_tol(
    s: &SketchSample,
    a: &DenseMatrix,
    smoothness: &SmoothnessSpec,
    rel_tol: f64,
) -> Result<SketchOperator, OperatorError> {
    let p = s.width();
    debug_assert_eq!(s.n(), a.cols());
    debug_assert_eq!(s.n(), smoothness.n());

    // AS, built without densifying identity-column samples.
    let a_s = match s {
        SketchSample::Columns {
            indices,
            basis: None,
            ..
        } => DenseMatrix::from_fn(a.rows(), p, |r, c| a[(r, indices[c])]),
        _ => {
            let sd = s.to_dense();
            a.matmul(&sd)
        }
    };

    // P_S = I_p − (AS)†(AS).
    let pinv_as = pseudo_inverse(&a_s, rel_tol)?;
    let mut projector = pinv_as.matrix().matmul(&a_s).scaled(-1.0);
    for i in 0..p {
        projector[(i, i)] += 1.0;
    }
    projector.symmetrize();

    let gram = smoothness.operator_gram(s)?;
    let gram_scale = gram.frobenius_norm();
    // Necessary PSD condition, caught before projection can mask it; the
    // full spectral check of M runs once at problem validation.
    for i in 0..p {
        if gram[(i, i)] < -1e-8 * gram_scale.max(1.0) {
            return Err(OperatorError::InvalidSmoothness { min: gram[(i, i)] });
        }
    }
    let mut inner = projector.matmul(&gram).matmul(&projector);
    inner.symmetrize();
    // One spectral factorization serves both the PSD pre-check of the
    // compressed curvature and the pseudo-inverse.
    let inner_eig = symmetric_eigen(&inner)?;
    if inner_eig.min() < -1e-8 * gram_scale.max(1.0) {
        return Err(OperatorError::InvalidSmoothness {
            min: inner_eig.min(),
        });
    }
    // Anchor the rank cutoff to the curvature scale: the projection can send
    // the whole compressed curvature to round-off, and inverting that noise
    // would break feasibility.
    let floor = rel_tol * gram_scale;
    let k_factors = pseudo_inverse_from_eigen(&inner_eig, rel_tol, floor)?;
    let rank = k_factors.rank();
    let inverse_core = k_factors.matrix();
    // Reapplying the projector keeps the assembled operator inside ker(AS)
    // against round-off.
    let mut core = projector.matmul(&inverse_core).matmul(&projector);
    core.symmetrize();

    Ok(SketchOperator {
        sample: s.clone(),
        a_s,
        projector,
        inverse_core,
        core,
        rank,
    })
}

impl SketchOperator {
    pub fn sample(&self) -> &SketchSample {
        &self.sample
    }

    pub fn cached_as(&self) -> &DenseMatrix {
        &self.a_s
    }

    pub fn projector(&self) -> &DenseMatrix {
        &self.projector
    }

    pub fn inverse_core(&self) -> &DenseMatrix {
        &self.inverse_core
    }

    /// Rank of Z_S; zero means the sample cannot move (a permitted no-op).
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn is_null(&self) -> bool {
        self.rank == 0
    }

    /// The p-vector w with Z_S g = S w; touches only p coordinates for
    /// identity-column samples.
    pub fn compressed_apply(&self, g: &[f64]) -> Vec<f64> {
        let sg = self.sample.gather(g);
        self.core.matvec(&sg)
    }

    /// Z_S g without materializing Z_S.
    pub fn apply(&self, g: &[f64]) -> Vec<f64> {
        let w = self.compressed_apply(g);
        let mut out = vec![0.0; self.sample.n()];
        self.sample.scatter_add(&w, &mut out);
        out
    }

    /// Materializes Z_S (diagnostics and tests only).
    pub fn to_dense(&self) -> DenseMatrix {
        let n = self.sample.n();
        match &self.sample {
            SketchSample::Columns {
                indices,
                basis: None,
                ..
            } => {
                let mut z = DenseMatrix::zeros(n, n);
                for (a, &i) in indices.iter().enumerate() {
                    for (b, &j) in indices.iter().enumerate() {
                        z[(i, j)] = self.core[(a, b)];
                    }
                }
                z
            }
            _ => {
                let sd = self.sample.to_dense();
                sd.matmul(&self.core).matmul(&sd.transpose())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::SymmetricForm;
    use crate::sketch::{SketchDistribution, SketchKind};

    fn ones_row(n: usize) -> DenseMatrix {
        DenseMatrix::from_rows(&[vec![1.0; n]]).unwrap()
    }

    fn identity_smoothness(n: usize) -> SmoothnessSpec {
        SmoothnessSpec::Fixed(SymmetricForm::ScaledIdentity { n, lambda: 1.0 })
    }

    #[test]
    fn pair_operator_matches_the_closed_form() {
        // n=3, A=[1,1,1], M=I, S=[e_1,e_2]: Z_S = ½(e_1−e_2)(e_1−e_2)ᵀ.
        let a = ones_row(3);
        let s = SketchSample::identity_columns(3, vec![0, 1]);
        let op = build_sketch_operator(&s, &a, &identity_smoothness(3)).unwrap();
        let z = op.to_dense();
        let expect = DenseMatrix::from_rows(&[
            vec![0.5, -0.5, 0.0],
            vec![-0.5, 0.5, 0.0],
            vec![0.0, 0.0, 0.0],
        ])
        .unwrap();
        assert!(z.sub(&expect).max_abs() < 1e-12);
    }

    #[test]
    fn row_space_vectors_are_annihilated() {
        let a = ones_row(3);
        let s = SketchSample::identity_columns(3, vec![0, 1]);
        let op = build_sketch_operator(&s, &a, &identity_smoothness(3)).unwrap();
        let u = vec![1.0, 1.0, 1.0];
        let zu = op.apply(&u);
        assert!(zu.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn full_sketch_recovers_the_projected_gradient_operator() {
        // S = I_3, A = ones: Z = I − eeᵀ/3, computed independently from the
        // direct formula with P = I − A†A.
        let n = 3;
        let a = ones_row(n);
        let s = SketchSample::identity_columns(n, (0..n).collect());
        let op = build_sketch_operator(&s, &a, &identity_smoothness(n)).unwrap();
        let z = op.to_dense();
        let mut expect = DenseMatrix::identity(n);
        expect.add_scaled(-1.0 / n as f64, &DenseMatrix::from_fn(n, n, |_, _| 1.0));
        assert!(z.sub(&expect).max_abs() < 1e-12);
    }

    #[test]
    fn apply_matches_the_closed_form_direction() {
        // Equal-curvature pair with g = (4, 2, 7): Z_S g = ½(g1−g2)(e_1−e_2)
        // = (1, −1, 0).
        let a = ones_row(3);
        let s = SketchSample::identity_columns(3, vec![0, 1]);
        let op = build_sketch_operator(&s, &a, &identity_smoothness(3)).unwrap();
        let g = vec![4.0, 2.0, 7.0];
        let zg = op.apply(&g);
        assert!((zg[0] - 1.0).abs() < 1e-12);
        assert!((zg[1] + 1.0).abs() < 1e-12);
        assert!(zg[2].abs() < 1e-12);
    }

    #[test]
    fn zero_gradient_maps_to_zero() {
        let a = ones_row(3);
        let s = SketchSample::identity_columns(3, vec![0, 1]);
        let op = build_sketch_operator(&s, &a, &identity_smoothness(3)).unwrap();
        let zg = op.apply(&[0.0, 0.0, 0.0]);
        assert!(zg.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn degenerate_sample_yields_a_null_operator() {
        // p=1 identity column against a dense constraint row: ker(AS) = {0}.
        let a = ones_row(3);
        let s = SketchSample::identity_columns(3, vec![1]);
        let op = build_sketch_operator(&s, &a, &identity_smoothness(3)).unwrap();
        assert!(op.is_null());
        let zg = op.apply(&[1.0, 2.0, 3.0]);
        assert!(zg.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn indefinite_curvature_is_rejected() {
        let a = ones_row(3);
        let s = SketchSample::identity_columns(3, vec![0, 1]);
        let m = SmoothnessSpec::Fixed(SymmetricForm::Diagonal(vec![1.0, -1.0, 1.0]));
        assert!(matches!(
            build_sketch_operator(&s, &a, &m),
            Err(OperatorError::InvalidSmoothness { .. })
        ));
    }

    #[test]
    fn operator_identities_hold_across_kinds_and_random_instances() {
        // Z_S symmetric PSD, Z_S Aᵀ = 0, Z_S M Z_S = Z_S; range(Z_S) ⊆ ker(A).
        let mut mk_rng = {
            let mut state = 0x51ab_cdefu64;
            move || {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            }
        };
        for trial in 0..12 {
            let n = 6 + (trial % 5);
            let m_rows = 1 + (trial % 3);
            let a = DenseMatrix::from_fn(m_rows, n, |_, _| mk_rng());
            // PD curvature via a random factor plus a ridge.
            let f = DenseMatrix::from_fn(n, n, |_, _| mk_rng());
            let m_form = SymmetricForm::Factored {
                factor: f,
                ridge: 0.5,
            };
            let m_dense = m_form.to_dense();
            let smoothness = SmoothnessSpec::Fixed(m_form);
            let kinds = [
                SketchKind::RandomTuples { p: m_rows + 1 },
                SketchKind::GaussianDense { p: m_rows + 1 },
                SketchKind::FixedPartitionPairs {
                    mode: Default::default(),
                },
            ];
            for kind in kinds {
                let mut dist =
                    SketchDistribution::new(kind, n, 17 + trial as u64, Some(&a)).unwrap();
                let s = dist.sample();
                let op = build_sketch_operator(&s, &a, &smoothness).unwrap();
                let z = op.to_dense();
                assert!(z.sub(&z.transpose()).max_abs() < 1e-9);
                let eig = symmetric_eigen(&z).unwrap();
                assert!(eig.min() > -1e-8 * (1.0 + eig.max().abs()));
                let zat = z.matmul(&a.transpose());
                assert!(zat.max_abs() < 1e-8 * (1.0 + z.max_abs()));
                let zmz = z.matmul(&m_dense).matmul(&z);
                let err = zmz.sub(&z).frobenius_norm();
                assert!(err < 1e-8 * (1.0 + z.frobenius_norm()), "zmz err {err}");
            }
        }
    }
}
