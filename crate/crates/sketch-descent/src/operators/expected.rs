//! The expected operator Z = E[Z_S], its pseudo-inverse, and the norms it
//! induces on ker(A).
//!
//! Z inherits symmetry and positive semidefiniteness from the samples and
//! satisfies ker(Z) = range(Aᵀ) when the sampling is valid, so it is positive
//! definite on ker(A). That validity is exactly the condition checked by
//! [`ExpectedOperator::assumption_check`]; when it holds, ‖u‖_Z = √(uᵀZu) and
//! ‖x‖*_Z = √(xᵀZ†x) are a conjugate primal/dual pair on the feasible
//! directions.

use super::{build_sketch_operator_with_tol, OperatorError};
use crate::forms::SmoothnessSpec;
use crate::linalg::{
    kernel_basis, pseudo_inverse_symmetric, symmetric_eigen, DenseMatrix, PseudoInverseFactors,
    SubspaceBasis, DEFAULT_RANK_TOL,
};
use crate::sketch::SketchDistribution;
use serde::Serialize;

/// Rank cutoff used for Z†.
const Z_PINV_TOL: f64 = 1e-10;
/// Positive-definiteness threshold on the restricted spectrum.
const ASSUMPTION_TOL: f64 = 1e-10;

/// How an expectation over the sketch distribution is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum EstimationMode {
    /// Probability-weighted sum over the enumerated support.
    Exact,
    /// Empirical average of independent realizations.
    MonteCarlo { samples: usize, seed: u64 },
}

/// Provenance of an assembled expected operator.
#[derive(Debug, Clone, Copy, Serialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum ZSource {
    Exact {
        atoms: usize,
    },
    MonteCarlo {
        samples: usize,
        seed: u64,
        /// √(Σ entrywise variances / samples): a Frobenius-scale standard
        /// error of the estimate.
        std_error: f64,
    },
}

/// Z = E[Z_S] with its pseudo-inverse and the kernel basis of A.
#[derive(Debug, Clone)]
pub struct ExpectedOperator {
    a: DenseMatrix,
    z: DenseMatrix,
    z_pinv: PseudoInverseFactors,
    z_pinv_dense: DenseMatrix,
    kernel: SubspaceBasis,
    source: ZSource,
}

/// Verdict of the positive-definiteness check on ker(A).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AssumptionZReport {
    pub holds: bool,
    /// The kernel is empty: the feasible set is a single point and the
    /// condition is vacuous.
    pub degenerate_kernel: bool,
    pub kernel_dim: usize,
    pub lambda_min_on_kernel: f64,
}

impl ExpectedOperator {
    /// Assembles Z for a distribution, either exactly over the support or by
    /// Monte-Carlo averaging.
    pub fn build(
        dist: &SketchDistribution,
        a: &DenseMatrix,
        smoothness: &SmoothnessSpec,
        mode: EstimationMode,
    ) -> Result<Self, OperatorError> {
        let n = dist.n();
        let mut z = DenseMatrix::zeros(n, n);
        let source = match mode {
            EstimationMode::Exact => {
                if !dist.is_enumerable() {
                    return Err(OperatorError::NotEnumerable);
                }
                let support = dist.enumerate_support()?;
                for (s, prob) in &support {
                    if *prob <= 0.0 {
                        continue;
                    }
                    let op = build_sketch_operator_with_tol(s, a, smoothness, DEFAULT_RANK_TOL)?;
                    z.add_scaled(*prob, &op.to_dense());
                }
                ZSource::Exact {
                    atoms: support.len(),
                }
            }
            EstimationMode::MonteCarlo { samples, seed } => {
                if samples == 0 {
                    return Err(OperatorError::Sketch(
                        crate::sketch::SketchError::InvalidConfig(
                            "monte-carlo estimation needs samples > 0".into(),
                        ),
                    ));
                }
                let mut dist = dist.reseeded(seed);
                let mut sumsq = DenseMatrix::zeros(n, n);
                for _ in 0..samples {
                    let s = dist.sample();
                    let op = build_sketch_operator_with_tol(&s, a, smoothness, DEFAULT_RANK_TOL)?;
                    let zs = op.to_dense();
                    z.add_scaled(1.0, &zs);
                    for i in 0..n {
                        for j in 0..n {
                            sumsq[(i, j)] += zs[(i, j)] * zs[(i, j)];
                        }
                    }
                }
                let inv = 1.0 / samples as f64;
                z = z.scaled(inv);
                // Var of the mean, summed over entries.
                let mut var_total = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        let var = (sumsq[(i, j)] * inv - z[(i, j)] * z[(i, j)]).max(0.0);
                        var_total += var * inv;
                    }
                }
                ZSource::MonteCarlo {
                    samples,
                    seed,
                    std_error: var_total.sqrt(),
                }
            }
        };
        z.symmetrize();
        let z_pinv = pseudo_inverse_symmetric(&z, Z_PINV_TOL)?;
        let z_pinv_dense = z_pinv.matrix();
        let kernel = kernel_basis(a, DEFAULT_RANK_TOL)?;
        Ok(Self {
            a: a.clone(),
            z,
            z_pinv,
            z_pinv_dense,
            kernel,
            source,
        })
    }

    pub fn z(&self) -> &DenseMatrix {
        &self.z
    }

    pub fn z_pinv(&self) -> &PseudoInverseFactors {
        &self.z_pinv
    }

    pub fn z_pinv_dense(&self) -> &DenseMatrix {
        &self.z_pinv_dense
    }

    pub fn kernel(&self) -> &SubspaceBasis {
        &self.kernel
    }

    pub fn constraint_matrix(&self) -> &DenseMatrix {
        &self.a
    }

    pub fn source(&self) -> ZSource {
        self.source
    }

    /// Positive definiteness of Z on ker(A). Equivalent to
    /// rank(Z) = dim ker(A) since range(Aᵀ) ⊆ ker(Z) always holds.
    pub fn assumption_check(&self) -> AssumptionZReport {
        let dim = self.kernel.dim();
        if dim == 0 {
            return AssumptionZReport {
                holds: true,
                degenerate_kernel: true,
                kernel_dim: 0,
                lambda_min_on_kernel: f64::NAN,
            };
        }
        let restricted = self.kernel.restrict(&self.z);
        let lambda_min = match symmetric_eigen(&restricted) {
            Ok(eig) => eig.min(),
            Err(_) => f64::NEG_INFINITY,
        };
        AssumptionZReport {
            holds: lambda_min > ASSUMPTION_TOL,
            degenerate_kernel: false,
            kernel_dim: dim,
            lambda_min_on_kernel: lambda_min,
        }
    }

    /// ‖u‖_Z = √(uᵀZu). Zero exactly on range(Aᵀ).
    pub fn primal_norm(&self, u: &[f64]) -> f64 {
        self.z.bilinear(u, u).max(0.0).sqrt()
    }

    /// ‖x‖*_Z = √(xᵀZ†x), defined for x ∈ ker(A).
    pub fn dual_norm(&self, x: &[f64]) -> Result<f64, OperatorError> {
        let ax = self.a.matvec(x);
        let residual = ax.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let scale = self.a.max_abs().max(1.0) * x.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        if residual > 1e-8 * scale {
            return Err(OperatorError::OutsideKernel { residual });
        }
        Ok(self.z_pinv_dense.bilinear(x, x).max(0.0).sqrt())
    }

    /// Stationarity measure ‖∇f(x)_⊥‖_Z of a gradient vector: the Z-norm of
    /// its ker(A) component, which equals ‖∇f(x)‖_Z because ker(Z) absorbs
    /// the range(Aᵀ) part.
    pub fn optimality_measure(&self, grad: &[f64]) -> f64 {
        self.primal_norm(grad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::SymmetricForm;
    use crate::sketch::SketchKind;

    fn ones_row(n: usize) -> DenseMatrix {
        DenseMatrix::from_rows(&[vec![1.0; n]]).unwrap()
    }

    fn equal_pair_dist(n: usize) -> SketchDistribution {
        SketchDistribution::new(
            SketchKind::LipschitzWeightedPairs {
                lipschitz: vec![1.0; n],
            },
            n,
            0,
            None,
        )
        .unwrap()
    }

    fn identity_smoothness(n: usize) -> SmoothnessSpec {
        SmoothnessSpec::Fixed(SymmetricForm::ScaledIdentity { n, lambda: 1.0 })
    }

    /// Closed form for the equal-weight pair family on a single sum
    /// constraint: Z = n/((n−1)L) (I − eeᵀ/n) with L = ΣL_i.
    fn closed_form_z(n: usize) -> DenseMatrix {
        let l: f64 = n as f64;
        let c = n as f64 / ((n as f64 - 1.0) * l);
        let mut z = DenseMatrix::identity(n);
        z.add_scaled(-1.0 / n as f64, &DenseMatrix::from_fn(n, n, |_, _| 1.0));
        z.scaled(c)
    }

    #[test]
    fn exact_expectation_matches_the_closed_form() {
        for n in [3usize, 5] {
            let dist = equal_pair_dist(n);
            let zop = ExpectedOperator::build(
                &dist,
                &ones_row(n),
                &identity_smoothness(n),
                EstimationMode::Exact,
            )
            .unwrap();
            let err = zop.z().sub(&closed_form_z(n)).frobenius_norm();
            assert!(err < 1e-13, "n={n}: err {err}");
            // Z† closed form: (n−1)L/n (I − eeᵀ/n).
            let zd_expect = closed_form_z(n)
                .scaled(((n as f64 - 1.0) * n as f64 / n as f64).powi(2));
            let err_d = zop.z_pinv_dense().sub(&zd_expect).frobenius_norm();
            assert!(err_d < 1e-10, "n={n}: pinv err {err_d}");
        }
    }

    #[test]
    fn monte_carlo_estimate_approaches_the_exact_operator() {
        let n = 3;
        let dist = equal_pair_dist(n);
        let zop_mc = ExpectedOperator::build(
            &dist,
            &ones_row(n),
            &identity_smoothness(n),
            EstimationMode::MonteCarlo {
                samples: 5000,
                seed: 42,
            },
        )
        .unwrap();
        let err = zop_mc.z().sub(&closed_form_z(n)).frobenius_norm();
        assert!(err < 5e-2, "MC err {err}");
        match zop_mc.source() {
            ZSource::MonteCarlo { std_error, .. } => assert!(std_error > 0.0),
            _ => panic!("expected monte-carlo source"),
        }
    }

    #[test]
    fn expected_operator_annihilates_the_row_space() {
        let n = 4;
        let zop = ExpectedOperator::build(
            &equal_pair_dist(n),
            &ones_row(n),
            &identity_smoothness(n),
            EstimationMode::Exact,
        )
        .unwrap();
        let u = vec![1.0; n];
        let zu = zop.z().matvec(&u);
        assert!(zu.iter().all(|v| v.abs() < 1e-12));
        assert!(zop.primal_norm(&u) < 1e-8);
    }

    #[test]
    fn assumption_holds_for_pair_family_and_fails_for_a_single_block() {
        let n = 3;
        let zop = ExpectedOperator::build(
            &equal_pair_dist(n),
            &ones_row(n),
            &identity_smoothness(n),
            EstimationMode::Exact,
        )
        .unwrap();
        let report = zop.assumption_check();
        assert!(report.holds && !report.degenerate_kernel);
        assert_eq!(report.kernel_dim, 2);

        // Single kernel-basis column cycling over one block of width 1 spans
        // only part of a 2-dimensional kernel when the basis is restricted:
        // emulate a single-atom family via fixed pairs on the first pair only.
        let single = SketchDistribution::new(
            SketchKind::KernelBasisBlocks { p: 1 },
            n,
            0,
            Some(&ones_row(n)),
        )
        .unwrap();
        // KernelBasisBlocks with p=1 has 2 atoms and covers the kernel, so
        // instead restrict to an explicitly degenerate family: a fixed
        // partition on a 3-vector where one atom is removed is not
        // expressible; use a direct single-pair average.
        drop(single);
        let s = crate::sketch::SketchSample::identity_columns(n, vec![0, 1]);
        let op =
            crate::operators::build_sketch_operator(&s, &ones_row(n), &identity_smoothness(n))
                .unwrap();
        let z = op.to_dense();
        let z_pinv = pseudo_inverse_symmetric(&z, 1e-10).unwrap();
        let kernel = kernel_basis(&ones_row(n), 1e-12).unwrap();
        let single_atom = ExpectedOperator {
            a: ones_row(n),
            z: z.clone(),
            z_pinv_dense: z_pinv.matrix(),
            z_pinv,
            kernel,
            source: ZSource::Exact { atoms: 1 },
        };
        let report = single_atom.assumption_check();
        assert!(!report.holds, "rank(Z)=1 < 2 must fail the check");
    }

    #[test]
    fn empty_kernel_reports_degenerate() {
        let a = DenseMatrix::identity(3);
        let dist = SketchDistribution::new(SketchKind::RandomTuples { p: 2 }, 3, 0, None).unwrap();
        let zop =
            ExpectedOperator::build(&dist, &a, &identity_smoothness(3), EstimationMode::Exact)
                .unwrap();
        let report = zop.assumption_check();
        assert!(report.degenerate_kernel);
        assert!(report.holds);
    }

    #[test]
    fn primal_and_dual_norms_match_the_worked_example() {
        let n = 3;
        let zop = ExpectedOperator::build(
            &equal_pair_dist(n),
            &ones_row(n),
            &identity_smoothness(n),
            EstimationMode::Exact,
        )
        .unwrap();
        let u = vec![1.0, -1.0, 0.0];
        assert!((zop.primal_norm(&u) - 1.0).abs() < 1e-12);
        assert!((zop.dual_norm(&u).unwrap() - 2.0).abs() < 1e-10);
        // Cauchy–Schwarz with itself: ⟨u,u⟩ = 2 ≤ 1 · 2.
        assert!(2.0 <= zop.primal_norm(&u) * zop.dual_norm(&u).unwrap() + 1e-12);
    }

    #[test]
    fn dual_norm_rejects_vectors_outside_the_kernel() {
        let n = 3;
        let zop = ExpectedOperator::build(
            &equal_pair_dist(n),
            &ones_row(n),
            &identity_smoothness(n),
            EstimationMode::Exact,
        )
        .unwrap();
        assert!(matches!(
            zop.dual_norm(&[1.0, 0.0, 0.0]),
            Err(OperatorError::OutsideKernel { .. })
        ));
    }

    #[test]
    fn optimality_measure_ignores_row_space_components() {
        let n = 3;
        let zop = ExpectedOperator::build(
            &equal_pair_dist(n),
            &ones_row(n),
            &identity_smoothness(n),
            EstimationMode::Exact,
        )
        .unwrap();
        let g_perp = vec![1.0, -1.0, 0.0];
        let with_row_space: Vec<f64> = g_perp.iter().map(|v| v + 7.5).collect();
        let m1 = zop.optimality_measure(&g_perp);
        let m2 = zop.optimality_measure(&with_row_space);
        assert!((m1 - 1.0).abs() < 1e-12);
        assert!((m1 - m2).abs() < 1e-9);
        // Stationary gradients measure zero.
        assert!(zop.optimality_measure(&[3.0, 3.0, 3.0]) < 1e-9);
    }
}
