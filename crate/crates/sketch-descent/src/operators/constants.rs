//! Convergence-rate constants of the sketched iteration.
//!
//! `sigma_z` is the largest σ with G ⪰ σ Z† on ker(A): the strong-convexity
//! constant in the dual norm, which drives the (1 − σ_Z) linear rate of the
//! plain iteration. `nu_max` is the second-moment constant
//! max_{u ∈ ker(A)} E[‖Z_S u‖²_{Z†}] / ‖u‖²_Z, reduced here to the largest
//! generalized eigenvalue of (UᵀWU, UᵀZU) with W = E[Z_S Z† Z_S]; the
//! accelerated iteration needs any ν ≥ ν_max. Both are sandwiched:
//! 0 ≤ σ_Z ≤ λ_max(M^½ Z M^½) ≤ 1 and σ_Z ≤ ν_max ≤ λ_max(M^{−½} Z† M^{−½}).

use super::{build_sketch_operator_with_tol, EstimationMode, ExpectedOperator, OperatorError};
use crate::forms::{SmoothnessSpec, SymmetricForm};
use crate::linalg::{
    generalized_eig_extremes_restricted, symmetric_eigen, DenseMatrix, DEFAULT_RANK_TOL,
};
use crate::sketch::SketchDistribution;
use serde::Serialize;

/// How the constants were obtained.
#[derive(Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstantsEstimate {
    Exact,
    MonteCarlo { samples: usize, seed: u64 },
}

/// The rate constants for one (problem, distribution) pairing.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceConstants {
    /// Largest σ with G ⪰ σ Z† on ker(A); `None` when no strong-convexity
    /// matrix is available.
    pub sigma_z: Option<f64>,
    /// Second-moment constant ν_max.
    pub nu_max: f64,
    /// Safe upper bound λ_max(M^{−1/2} Z† M^{−1/2}) ≥ ν_max.
    pub nu_upper_bound: f64,
    /// λ_max(M^{1/2} Z M^{1/2}) ∈ (0, 1].
    pub lambda_max_mzm: f64,
    pub estimate: ConstantsEstimate,
}

/// σ_Z for a strong-convexity matrix G: the smallest generalized eigenvalue
/// of (UᵀGU, UᵀZ†U) over a kernel basis U.
pub fn sigma_z(zop: &ExpectedOperator, g: &SymmetricForm) -> Result<f64, OperatorError> {
    let kernel = zop.kernel();
    if kernel.dim() == 0 {
        return Err(OperatorError::EmptyKernel);
    }
    let report = zop.assumption_check();
    if !report.holds {
        return Err(OperatorError::AssumptionViolated {
            min: report.lambda_min_on_kernel,
        });
    }
    let g_r = restrict_form(g, kernel);
    let zd_r = kernel.restrict(zop.z_pinv_dense());
    let (lo, _hi) = generalized_eig_extremes_restricted(&g_r, &zd_r)?;
    Ok(lo)
}

/// ν_max through W = E[Z_S Z† Z_S]: the largest generalized eigenvalue of
/// (UᵀWU, UᵀZU).
pub fn nu_max(
    dist: &SketchDistribution,
    zop: &ExpectedOperator,
    a: &DenseMatrix,
    smoothness: &SmoothnessSpec,
    mode: EstimationMode,
) -> Result<f64, OperatorError> {
    let kernel = zop.kernel();
    if kernel.dim() == 0 {
        return Err(OperatorError::EmptyKernel);
    }
    let report = zop.assumption_check();
    if !report.holds {
        return Err(OperatorError::AssumptionViolated {
            min: report.lambda_min_on_kernel,
        });
    }
    let n = dist.n();
    let z_pinv = zop.z_pinv_dense();
    let mut w = DenseMatrix::zeros(n, n);
    match mode {
        EstimationMode::Exact => {
            if !dist.is_enumerable() {
                return Err(OperatorError::NotEnumerable);
            }
            for (s, prob) in dist.enumerate_support()? {
                if prob <= 0.0 {
                    continue;
                }
                let op = build_sketch_operator_with_tol(&s, a, smoothness, DEFAULT_RANK_TOL)?;
                let zs = op.to_dense();
                let zzz = zs.matmul(z_pinv).matmul(&zs);
                w.add_scaled(prob, &zzz);
            }
        }
        EstimationMode::MonteCarlo { samples, seed } => {
            let mut dist = dist.reseeded(seed);
            for _ in 0..samples {
                let s = dist.sample();
                let op = build_sketch_operator_with_tol(&s, a, smoothness, DEFAULT_RANK_TOL)?;
                let zs = op.to_dense();
                let zzz = zs.matmul(z_pinv).matmul(&zs);
                w.add_scaled(1.0 / samples as f64, &zzz);
            }
        }
    }
    w.symmetrize();
    let w_r = kernel.restrict(&w);
    let z_r = kernel.restrict(zop.z());
    let (_lo, hi) = generalized_eig_extremes_restricted(&w_r, &z_r)?;
    Ok(hi)
}

impl ConvergenceConstants {
    /// Computes every constant for a fixed-M smoothness spec. The per-sketch
    /// smoothness rule has no fixed M and therefore no spectral constants.
    pub fn compute(
        dist: &SketchDistribution,
        a: &DenseMatrix,
        smoothness: &SmoothnessSpec,
        strong_convexity: Option<&SymmetricForm>,
        zop: &ExpectedOperator,
        mode: EstimationMode,
    ) -> Result<Self, OperatorError> {
        let m_form = smoothness
            .fixed()
            .ok_or(OperatorError::VariableSmoothness)?;
        let sigma = match strong_convexity {
            Some(g) => Some(sigma_z(zop, g)?),
            None => None,
        };
        let nu = nu_max(dist, zop, a, smoothness, mode)?;

        let m_dense = m_form.to_dense();
        let m_eig = symmetric_eigen(&m_dense)?;
        let lam_scale = m_eig.max().abs().max(1.0);
        let cutoff = DEFAULT_RANK_TOL * lam_scale;
        let m_sqrt = m_eig.spectral_map(|l| if l > cutoff { l.sqrt() } else { 0.0 });
        let m_inv_sqrt = m_eig.spectral_map(|l| if l > cutoff { 1.0 / l.sqrt() } else { 0.0 });

        let mzm = m_sqrt.matmul(zop.z()).matmul(&m_sqrt);
        let lambda_max_mzm = symmetric_eigen(&mzm)?.max();
        let upper_mat = m_inv_sqrt.matmul(zop.z_pinv_dense()).matmul(&m_inv_sqrt);
        let nu_upper_bound = symmetric_eigen(&upper_mat)?.max();

        Ok(Self {
            sigma_z: sigma,
            nu_max: nu,
            nu_upper_bound,
            lambda_max_mzm,
            estimate: match mode {
                EstimationMode::Exact => ConstantsEstimate::Exact,
                EstimationMode::MonteCarlo { samples, seed } => {
                    ConstantsEstimate::MonteCarlo { samples, seed }
                }
            },
        })
    }
}

fn restrict_form(form: &SymmetricForm, kernel: &crate::linalg::SubspaceBasis) -> DenseMatrix {
    let d = kernel.dim();
    let cols = kernel.columns();
    // (G U) column by column, then Uᵀ(GU).
    let mut gu = DenseMatrix::zeros(kernel.n(), d);
    for j in 0..d {
        let col = cols.col(j);
        let gcol = form.matvec(&col);
        gu.set_col(j, &gcol);
    }
    cols.transpose().matmul(&gu)
}

/// Z restricted to ker(A) acts as the inverse of Z† there; exposed for tests.
pub(crate) fn _check_pinv_inverse_on_kernel(zop: &ExpectedOperator) -> f64 {
    let kernel = zop.kernel();
    let z_r = kernel.restrict(zop.z());
    let zd_r = kernel.restrict(zop.z_pinv_dense());
    let prod = z_r.matmul(&zd_r);
    prod.sub(&DenseMatrix::identity(kernel.dim())).max_abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sketch::SketchKind;

    fn ones_row(n: usize) -> DenseMatrix {
        DenseMatrix::from_rows(&[vec![1.0; n]]).unwrap()
    }

    fn equal_pair_setup(n: usize) -> (SketchDistribution, DenseMatrix, SmoothnessSpec) {
        let dist = SketchDistribution::new(
            SketchKind::LipschitzWeightedPairs {
                lipschitz: vec![1.0; n],
            },
            n,
            0,
            None,
        )
        .unwrap();
        let a = ones_row(n);
        let m = SmoothnessSpec::Fixed(SymmetricForm::ScaledIdentity { n, lambda: 1.0 });
        (dist, a, m)
    }

    #[test]
    fn sigma_for_identity_curvature_matches_the_closed_form() {
        // Equal pairs, n=3, G = I: Z† acts as 2I on the kernel, so σ = 1/2.
        let (dist, a, m) = equal_pair_setup(3);
        let zop = ExpectedOperator::build(&dist, &a, &m, EstimationMode::Exact).unwrap();
        let g = SymmetricForm::ScaledIdentity { n: 3, lambda: 1.0 };
        let s = sigma_z(&zop, &g).unwrap();
        assert!((s - 0.5).abs() < 1e-10, "sigma {s}");
    }

    #[test]
    fn sigma_is_one_when_g_equals_z_pinv() {
        let (dist, a, m) = equal_pair_setup(4);
        let zop = ExpectedOperator::build(&dist, &a, &m, EstimationMode::Exact).unwrap();
        let g = SymmetricForm::Dense(zop.z_pinv_dense().clone());
        let s = sigma_z(&zop, &g).unwrap();
        assert!((s - 1.0).abs() < 1e-8, "sigma {s}");
    }

    #[test]
    fn sigma_vanishes_for_a_merely_convex_objective() {
        let (dist, a, m) = equal_pair_setup(4);
        let zop = ExpectedOperator::build(&dist, &a, &m, EstimationMode::Exact).unwrap();
        let g = SymmetricForm::ScaledIdentity { n: 4, lambda: 0.0 };
        let s = sigma_z(&zop, &g).unwrap();
        assert!(s.abs() < 1e-12);
    }

    #[test]
    fn nu_for_equal_pairs_attains_the_worked_bound() {
        // Equal weights: Z_S Z† Z_S = (n−1) Z_S, so ν_max = n−1; the worked
        // bound 2(n−1)L/(n(L_i+L_j)) evaluates to the same number.
        let (dist, a, m) = equal_pair_setup(3);
        let zop = ExpectedOperator::build(&dist, &a, &m, EstimationMode::Exact).unwrap();
        let nu = nu_max(&dist, &zop, &a, &m, EstimationMode::Exact).unwrap();
        assert!((nu - 2.0).abs() < 1e-9, "nu {nu}");
    }

    #[test]
    fn deterministic_full_sketch_has_unit_nu() {
        // Single-atom family with Z_S = Z: the second moment collapses.
        let n = 4;
        let dist = SketchDistribution::new(SketchKind::RandomTuples { p: n }, n, 0, None).unwrap();
        let a = ones_row(n);
        let m = SmoothnessSpec::Fixed(SymmetricForm::ScaledIdentity { n, lambda: 1.0 });
        let zop = ExpectedOperator::build(&dist, &a, &m, EstimationMode::Exact).unwrap();
        let nu = nu_max(&dist, &zop, &a, &m, EstimationMode::Exact).unwrap();
        assert!((nu - 1.0).abs() < 1e-8, "nu {nu}");
    }

    #[test]
    fn constants_obey_the_sandwich_inequalities() {
        let (dist, a, m) = equal_pair_setup(5);
        let zop = ExpectedOperator::build(&dist, &a, &m, EstimationMode::Exact).unwrap();
        let g = SymmetricForm::ScaledIdentity { n: 5, lambda: 1.0 };
        let c =
            ConvergenceConstants::compute(&dist, &a, &m, Some(&g), &zop, EstimationMode::Exact)
                .unwrap();
        let sigma = c.sigma_z.unwrap();
        assert!(sigma > 0.0);
        assert!(sigma <= c.lambda_max_mzm + 1e-8);
        assert!(c.lambda_max_mzm <= 1.0 + 1e-8);
        assert!(sigma <= c.nu_max + 1e-8);
        assert!(c.nu_max <= c.nu_upper_bound + 1e-8);
    }

    #[test]
    fn pinv_inverts_z_on_the_kernel() {
        let (dist, a, m) = equal_pair_setup(6);
        let zop = ExpectedOperator::build(&dist, &a, &m, EstimationMode::Exact).unwrap();
        assert!(super::_check_pinv_inverse_on_kernel(&zop) < 1e-8);
    }

    #[test]
    fn per_sketch_smoothness_has_no_spectral_constants() {
        let n = 4;
        let dist = SketchDistribution::new(SketchKind::RandomTuples { p: 2 }, n, 0, None).unwrap();
        let a = ones_row(n);
        let b = SymmetricForm::ScaledIdentity { n, lambda: 1.0 };
        let spec = SmoothnessSpec::PerSketch(b);
        let zop = ExpectedOperator::build(&dist, &a, &spec, EstimationMode::Exact).unwrap();
        assert!(matches!(
            ConvergenceConstants::compute(&dist, &a, &spec, None, &zop, EstimationMode::Exact),
            Err(OperatorError::VariableSmoothness)
        ));
    }
}
