//! Orthonormal null-space bases through Householder QR with column pivoting.

use super::{DenseMatrix, LinalgError};

/// An orthonormal set of columns spanning a subspace of ℝⁿ.
#[derive(Debug, Clone)]
pub struct SubspaceBasis {
    n: usize,
    columns: DenseMatrix,
}

impl SubspaceBasis {
    pub fn new(columns: DenseMatrix) -> Self {
        Self {
            n: columns.rows(),
            columns,
        }
    }

    /// Ambient dimension.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Subspace dimension.
    pub fn dim(&self) -> usize {
        self.columns.cols()
    }

    pub fn columns(&self) -> &DenseMatrix {
        &self.columns
    }

    /// Uᵀ x: coordinates of x in the basis.
    pub fn project_coords(&self, x: &[f64]) -> Vec<f64> {
        self.columns.tr_matvec(x)
    }

    /// U w: lift basis coordinates back to ℝⁿ.
    pub fn lift(&self, w: &[f64]) -> Vec<f64> {
        self.columns.matvec(w)
    }

    /// Uᵀ M U, the restriction of a symmetric matrix to the subspace.
    pub fn restrict(&self, m: &DenseMatrix) -> DenseMatrix {
        let mu = m.matmul(&self.columns);
        self.columns.transpose().matmul(&mu)
    }

    /// Max deviation of UᵀU from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let gram = self.columns.transpose().matmul(&self.columns);
        gram.sub(&DenseMatrix::identity(self.dim())).max_abs()
    }
}

/// Orthonormal basis of `ker(A)` for a wide matrix A (rows ≤ cols).
///
/// Computed from a full Householder QR of Aᵀ with column pivoting: the
/// trailing `n − rank(A)` columns of Q span the kernel. Rank is decided by
/// comparing remaining pivot column norms against `rel_tol ×` the first pivot.
pub fn kernel_basis(a: &DenseMatrix, rel_tol: f64) -> Result<SubspaceBasis, LinalgError> {
    let (m, n) = (a.rows(), a.cols());
    if m > n {
        return Err(LinalgError::InvalidShape(format!(
            "kernel_basis needs rows <= cols, got {m}x{n}"
        )));
    }
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(LinalgError::InvalidTolerance(rel_tol));
    }
    if !a.is_finite() {
        return Err(LinalgError::NonFinite { row: 0, col: 0 });
    }

    // r is Aᵀ, n×m; q accumulates the full n×n orthogonal factor.
    let mut r = a.transpose();
    let mut q = DenseMatrix::identity(n);
    let mut first_pivot = 0.0f64;
    let mut rank = 0usize;

    for k in 0..m.min(n) {
        // Fresh column norms below row k; m is small so recomputation is cheap
        // and avoids downdating drift.
        let mut best = k;
        let mut best_norm2 = 0.0;
        for j in k..m {
            let mut s = 0.0;
            for i in k..n {
                s += r[(i, j)] * r[(i, j)];
            }
            if s > best_norm2 {
                best_norm2 = s;
                best = j;
            }
        }
        let pivot_norm = best_norm2.sqrt();
        if k == 0 {
            first_pivot = pivot_norm;
        }
        if pivot_norm <= rel_tol * first_pivot || pivot_norm == 0.0 {
            break;
        }
        if best != k {
            for i in 0..n {
                let tmp = r[(i, k)];
                r[(i, k)] = r[(i, best)];
                r[(i, best)] = tmp;
            }
        }

        // Householder vector for column k, rows k..n.
        let alpha = -r[(k, k)].signum() * pivot_norm;
        let mut v: Vec<f64> = (k..n).map(|i| r[(i, k)]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 > 0.0 {
            let tau = 2.0 / vnorm2;
            // Apply H = I − τ v vᵀ to the remaining columns of r.
            for j in k..m {
                let mut s = 0.0;
                for (idx, i) in (k..n).enumerate() {
                    s += v[idx] * r[(i, j)];
                }
                s *= tau;
                for (idx, i) in (k..n).enumerate() {
                    r[(i, j)] -= s * v[idx];
                }
            }
            // Accumulate q ← q·H (H symmetric).
            for row in 0..n {
                let mut s = 0.0;
                for (idx, i) in (k..n).enumerate() {
                    s += q[(row, i)] * v[idx];
                }
                s *= tau;
                for (idx, i) in (k..n).enumerate() {
                    q[(row, i)] -= s * v[idx];
                }
            }
        }
        r[(k, k)] = alpha;
        for i in (k + 1)..n {
            r[(i, k)] = 0.0;
        }
        rank += 1;
    }

    let dim = n - rank;
    let mut columns = DenseMatrix::zeros(n, dim);
    for j in 0..dim {
        for i in 0..n {
            columns[(i, j)] = q[(i, rank + j)];
        }
    }
    Ok(SubspaceBasis { n, columns })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::svd_tall;

    #[test]
    fn all_ones_row_has_two_dimensional_kernel() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 1.0, 1.0]]).unwrap();
        let basis = kernel_basis(&a, 1e-12).unwrap();
        assert_eq!(basis.dim(), 2);
        assert!(basis.orthonormality_defect() < 1e-12);
        for j in 0..2 {
            let col = basis.columns().col(j);
            let sum: f64 = col.iter().sum();
            assert!(sum.abs() < 1e-10, "column sums to {sum}");
        }
    }

    #[test]
    fn identity_has_empty_kernel() {
        let a = DenseMatrix::identity(3);
        let basis = kernel_basis(&a, 1e-12).unwrap();
        assert_eq!(basis.dim(), 0);
    }

    #[test]
    fn rank_deficient_rows_counted_once() {
        // rank 1, kernel dimension 2; rank confirmed by an SVD oracle.
        let a = DenseMatrix::from_rows(&[vec![1.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]]).unwrap();
        let sv = svd_tall(&a.transpose()).unwrap().singular_values;
        let svd_rank = sv.iter().filter(|&&s| s > 1e-12 * sv[0]).count();
        assert_eq!(svd_rank, 1);
        let basis = kernel_basis(&a, 1e-12).unwrap();
        assert_eq!(basis.dim(), 3 - svd_rank);
    }

    #[test]
    fn tall_input_is_rejected() {
        let a = DenseMatrix::zeros(4, 2);
        assert!(matches!(
            kernel_basis(&a, 1e-12),
            Err(LinalgError::InvalidShape(_))
        ));
    }

    #[test]
    fn kernel_columns_are_annihilated_by_a() {
        let mut state = 77u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let a = DenseMatrix::from_fn(4, 11, |_, _| next());
        let basis = kernel_basis(&a, 1e-12).unwrap();
        assert_eq!(basis.dim(), 7);
        assert!(basis.orthonormality_defect() < 1e-12);
        for j in 0..basis.dim() {
            let col = basis.columns().col(j);
            let residual = a.matvec(&col);
            let worst = residual.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(worst < 1e-12 * a.max_abs().max(1.0));
        }
    }
}
