//! Generalized eigenvalue extremes of a symmetric pencil restricted to a
//! subspace: extreme λ with (UᵀPU) w = λ (UᵀQU) w.

use super::{symmetric_eigen, DenseMatrix, LinalgError, SubspaceBasis};

/// Relative floor under which the restricted metric UᵀQU counts as singular.
const METRIC_TOL: f64 = 1e-12;

/// Returns `(λ_min, λ_max)` of the pencil `(UᵀPU, UᵀQU)` where U holds the
/// basis columns. Requires UᵀQU positive definite.
pub fn generalized_eig_extremes(
    p: &DenseMatrix,
    q: &DenseMatrix,
    basis: &SubspaceBasis,
) -> Result<(f64, f64), LinalgError> {
    if basis.dim() == 0 {
        return Err(LinalgError::InvalidShape(
            "generalized eigenvalues need a nonempty basis".into(),
        ));
    }
    let p_r = basis.restrict(p);
    let q_r = basis.restrict(q);
    generalized_eig_extremes_restricted(&p_r, &q_r)
}

/// Same computation with the restrictions already formed.
pub fn generalized_eig_extremes_restricted(
    p_r: &DenseMatrix,
    q_r: &DenseMatrix,
) -> Result<(f64, f64), LinalgError> {
    let q_eig = symmetric_eigen(q_r)?;
    let lam_max = q_eig.max();
    let lam_min = q_eig.min();
    if lam_min <= METRIC_TOL * lam_max.max(0.0) || lam_max <= 0.0 {
        return Err(LinalgError::DegenerateMetric {
            min_abs: lam_min.abs(),
        });
    }
    // W = Q_r^{-1/2}; solve the standard problem for W P_r W.
    let w = q_eig.spectral_map(|lam| 1.0 / lam.sqrt());
    let reduced = w.matmul(p_r).matmul(&w);
    let eig = symmetric_eigen(&reduced)?;
    Ok((eig.min(), eig.max()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::kernel_basis;

    fn span(cols: Vec<Vec<f64>>) -> SubspaceBasis {
        let n = cols[0].len();
        let d = cols.len();
        let mut m = DenseMatrix::zeros(n, d);
        for (j, c) in cols.iter().enumerate() {
            m.set_col(j, c);
        }
        SubspaceBasis::new(m)
    }

    #[test]
    fn identical_forms_give_unit_eigenvalues() {
        let p = DenseMatrix::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let basis = span(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let (lo, hi) = generalized_eig_extremes(&p, &p, &basis).unwrap();
        assert!((lo - 1.0).abs() < 1e-12);
        assert!((hi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scaling_shifts_both_extremes() {
        let q = DenseMatrix::from_rows(&[vec![3.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let p = q.scaled(2.0);
        let basis = span(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let (lo, hi) = generalized_eig_extremes(&p, &q, &basis).unwrap();
        assert!((lo - 2.0).abs() < 1e-12);
        assert!((hi - 2.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_pencil_on_coordinate_plane_matches_direct_oracle() {
        // P = diag(1,2,3), Q = I, basis = span{e1,e2}: restriction is the
        // leading 2x2 block, so the direct 2x2 eigendecomposition gives (1, 2).
        let p = DenseMatrix::from_rows(&[
            vec![1.0, 0.0, 0.0],
            vec![0.0, 2.0, 0.0],
            vec![0.0, 0.0, 3.0],
        ])
        .unwrap();
        let q = DenseMatrix::identity(3);
        let basis = span(vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]);
        let (lo, hi) = generalized_eig_extremes(&p, &q, &basis).unwrap();
        assert!((lo - 1.0).abs() < 1e-12);
        assert!((hi - 2.0).abs() < 1e-12);
    }

    #[test]
    fn singular_metric_is_reported() {
        let p = DenseMatrix::identity(2);
        let q = DenseMatrix::zeros(2, 2);
        let basis = span(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!(matches!(
            generalized_eig_extremes(&p, &q, &basis),
            Err(LinalgError::DegenerateMetric { .. })
        ));
    }

    #[test]
    fn kernel_restricted_pencil_is_invariant_to_basis_choice() {
        // On ker([1,1,1]) with P = diag(1,2,3) and Q = I the extremes do not
        // depend on which orthonormal kernel basis is used.
        let a = DenseMatrix::from_rows(&[vec![1.0, 1.0, 1.0]]).unwrap();
        let basis = kernel_basis(&a, 1e-12).unwrap();
        let p = DenseMatrix::from_rows(&[
            vec![1.0, 0.0, 0.0],
            vec![0.0, 2.0, 0.0],
            vec![0.0, 0.0, 3.0],
        ])
        .unwrap();
        let q = DenseMatrix::identity(3);
        let (lo, hi) = generalized_eig_extremes(&p, &q, &basis).unwrap();
        // Rayleigh extremes of diag(1,2,3) over the zero-sum plane:
        // roots of the secular equation sum_i 1/(d_i - lambda) = 0.
        // For (1,2,3): lambda = 2 ± 1/sqrt(3).
        let expect_lo = 2.0 - 1.0 / 3.0f64.sqrt();
        let expect_hi = 2.0 + 1.0 / 3.0f64.sqrt();
        assert!((lo - expect_lo).abs() < 1e-10, "{lo} vs {expect_lo}");
        assert!((hi - expect_hi).abs() < 1e-10, "{hi} vs {expect_hi}");
    }
}
