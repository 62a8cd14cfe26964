//! Symmetric eigendecomposition by cyclic Jacobi rotations.
//!
//! Jacobi is slower than tridiagonalization-based methods but is simple,
//! unconditionally stable, and computes small eigenvalues of graded matrices
//! to high relative accuracy — which matters because rank decisions for
//! projector and pseudo-inverse construction ride on those values.

use super::{DenseMatrix, LinalgError};

/// Eigenvalues in ascending order; `vectors` holds the matching
/// orthonormal eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: DenseMatrix,
}

impl SymmetricEigen {
    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// V f(Λ) Vᵀ for an entrywise spectral map.
    pub fn spectral_map(&self, f: impl Fn(f64) -> f64) -> DenseMatrix {
        let n = self.values.len();
        let mut out = DenseMatrix::zeros(n, n);
        for (k, &lam) in self.values.iter().enumerate() {
            let flam = f(lam);
            if flam == 0.0 {
                continue;
            }
            for i in 0..n {
                let vik = self.vectors[(i, k)];
                if vik == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += flam * vik * self.vectors[(j, k)];
                }
            }
        }
        out
    }
}

const MAX_SWEEPS: usize = 64;

/// Eigendecomposition of a symmetric matrix. The input is symmetrized
/// (averaged with its transpose) before iterating, so mild asymmetry from
/// accumulated round-off is tolerated.
pub fn symmetric_eigen(a: &DenseMatrix) -> Result<SymmetricEigen, LinalgError> {
    if a.rows() != a.cols() {
        return Err(LinalgError::InvalidShape(format!(
            "symmetric_eigen needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let n = a.rows();
    if n == 0 {
        return Ok(SymmetricEigen {
            values: vec![],
            vectors: DenseMatrix::zeros(0, 0),
        });
    }
    let mut m = a.clone();
    m.symmetrize();
    let mut v = DenseMatrix::identity(n);
    let scale = m.max_abs();
    if scale == 0.0 {
        return Ok(SymmetricEigen {
            values: vec![0.0; n],
            vectors: v,
        });
    }

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[(i, j)].abs();
            }
        }
        if off <= 1e-300 || off <= f64::EPSILON * scale * (n as f64) * 0.01 {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                // Rotation is a no-op once apq is negligible against the diagonal.
                if apq.abs() <= f64::EPSILON * 1e-2 * (m[(p, p)].abs() + m[(q, q)].abs()).max(scale * 1e-20)
                {
                    m[(p, q)] = if apq.abs() < 1e-300 { 0.0 } else { apq };
                    continue;
                }
                let theta = 0.5 * (m[(q, q)] - m[(p, p)]) / apq;
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // Apply the rotation to rows/columns p and q.
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        // One more off-diagonal audit before giving up.
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[(i, j)].abs();
            }
        }
        if off > 1e-10 * scale {
            return Err(LinalgError::NoConvergence("jacobi eigenvalue sweeps"));
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].partial_cmp(&m[(j, j)]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| m[(i, i)]).collect();
    let mut vectors = DenseMatrix::zeros(n, n);
    for (new_j, &old_j) in order.iter().enumerate() {
        for i in 0..n {
            vectors[(i, new_j)] = v[(i, old_j)];
        }
    }
    Ok(SymmetricEigen { values, vectors })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reconstruct(e: &SymmetricEigen) -> DenseMatrix {
        e.spectral_map(|x| x)
    }

    #[test]
    fn diagonal_matrix_is_its_own_spectrum() {
        let a = DenseMatrix::from_rows(&[
            vec![3.0, 0.0, 0.0],
            vec![0.0, -1.0, 0.0],
            vec![0.0, 0.0, 2.0],
        ])
        .unwrap();
        let e = symmetric_eigen(&a).unwrap();
        assert_eq!(e.values, vec![-1.0, 2.0, 3.0]);
    }

    #[test]
    fn two_by_two_matches_closed_form() {
        // eigenvalues of [[2,1],[1,2]] are 1 and 3
        let a = DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let e = symmetric_eigen(&a).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-14);
        assert!((e.values[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn reconstruction_and_orthogonality_on_random_input() {
        // xorshift-style deterministic fill
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for n in [1usize, 2, 5, 12, 25] {
            let mut a = DenseMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..=i {
                    let v = next();
                    a[(i, j)] = v;
                    a[(j, i)] = v;
                }
            }
            let e = symmetric_eigen(&a).unwrap();
            let err = reconstruct(&e).sub(&a).frobenius_norm();
            assert!(err < 1e-12 * (1.0 + a.frobenius_norm()), "n={n}: err {err}");
            let vtv = e.vectors.transpose().matmul(&e.vectors);
            let gram_err = vtv.sub(&DenseMatrix::identity(n)).frobenius_norm();
            assert!(gram_err < 1e-13, "n={n}: gram err {gram_err}");
            for k in 1..n {
                assert!(e.values[k] >= e.values[k - 1]);
            }
        }
    }
}
