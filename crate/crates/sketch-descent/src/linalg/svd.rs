//! One-sided Jacobi SVD and the rank-cutoff pseudo-inverse built on it.

use super::{symmetric_eigen, DenseMatrix, LinalgError};

/// Thin singular value decomposition `B = U Σ Vᵀ` with `Σ` descending.
#[derive(Debug, Clone)]
pub struct Svd {
    /// rows(B) × k, orthonormal columns for the nonzero part of the spectrum.
    pub u: DenseMatrix,
    /// cols(B) × k, orthonormal columns.
    pub v: DenseMatrix,
    pub singular_values: Vec<f64>,
}

const MAX_SWEEPS: usize = 64;

/// One-sided Jacobi SVD of a tall (or square) matrix, `rows ≥ cols`.
/// Columns of the working copy are orthogonalized in place; their final norms
/// are the singular values.
pub fn svd_tall(b: &DenseMatrix) -> Result<Svd, LinalgError> {
    let (m, n) = (b.rows(), b.cols());
    if m < n {
        return Err(LinalgError::InvalidShape(format!(
            "svd_tall needs rows >= cols, got {m}x{n}"
        )));
    }
    // Work column-major for contiguous column access.
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| b.col(j)).collect();
    let mut v = DenseMatrix::identity(n);

    // Rotations of other pairs re-pollute a cleaned pair at the eps·√(αβ)
    // scale, so the skip threshold needs headroom above it or columns with
    // very unequal norms oscillate forever.
    let skip_factor = 8.0 * f64::EPSILON;
    let mut worst_ratio = if n < 2 { 0.0 } else { f64::INFINITY };
    for _ in 0..MAX_SWEEPS {
        if worst_ratio <= skip_factor {
            break;
        }
        worst_ratio = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let (ci, cj) = {
                    let (a, b) = cols.split_at_mut(j);
                    (&mut a[i], &mut b[0])
                };
                let alpha: f64 = ci.iter().map(|x| x * x).sum();
                let beta: f64 = cj.iter().map(|x| x * x).sum();
                let gamma: f64 = ci.iter().zip(cj.iter()).map(|(x, y)| x * y).sum();
                if alpha == 0.0 || beta == 0.0 || gamma.abs() <= 1e-300 {
                    continue;
                }
                let ratio = gamma.abs() / (alpha * beta).sqrt();
                if ratio <= skip_factor {
                    continue;
                }
                worst_ratio = worst_ratio.max(ratio);
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = if zeta.abs() > 1e150 {
                    0.5 / zeta
                } else {
                    zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for k in 0..m {
                    let x = ci[k];
                    let y = cj[k];
                    ci[k] = c * x - s * y;
                    cj[k] = s * x + c * y;
                }
                for k in 0..n {
                    let x = v[(k, i)];
                    let y = v[(k, j)];
                    v[(k, i)] = c * x - s * y;
                    v[(k, j)] = s * x + c * y;
                }
            }
        }
    }
    // Residual pair angles at 1e-10 or below perturb the factors well under
    // the contracts built on them; anything larger is a genuine failure.
    if worst_ratio > 1e-10 {
        return Err(LinalgError::NoConvergence("one-sided jacobi svd sweeps"));
    }

    let mut sigma: Vec<f64> = cols
        .iter()
        .map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| sigma[b].partial_cmp(&sigma[a]).unwrap());
    let sigma_sorted: Vec<f64> = order.iter().map(|&j| sigma[j]).collect();
    sigma = sigma_sorted;

    let mut u = DenseMatrix::zeros(m, n);
    let mut v_sorted = DenseMatrix::zeros(n, n);
    for (new_j, &old_j) in order.iter().enumerate() {
        let s = sigma[new_j];
        if s > 0.0 {
            for k in 0..m {
                u[(k, new_j)] = cols[old_j][k] / s;
            }
        }
        for k in 0..n {
            v_sorted[(k, new_j)] = v[(k, old_j)];
        }
    }
    Ok(Svd {
        u,
        v: v_sorted,
        singular_values: sigma,
    })
}

/// Factored Moore–Penrose pseudo-inverse `B† = V Σ_r⁻¹ U_rᵀ` of an
/// arbitrary dense matrix, with singular values below
/// `rel_tol × σ_max` treated as zero.
#[derive(Debug, Clone)]
pub struct PseudoInverseFactors {
    rows: usize,
    cols: usize,
    /// rows × k left singular vectors.
    u: DenseMatrix,
    /// cols × k right singular vectors.
    v: DenseMatrix,
    singular_values: Vec<f64>,
    rank: usize,
    cutoff: f64,
}

impl PseudoInverseFactors {
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Absolute singular-value cutoff that was applied.
    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn left_vectors(&self) -> &DenseMatrix {
        &self.u
    }

    pub fn right_vectors(&self) -> &DenseMatrix {
        &self.v
    }

    /// Applies B† to a vector of length rows(B).
    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for k in 0..self.rank {
            let mut coef = 0.0;
            for i in 0..self.rows {
                coef += self.u[(i, k)] * y[i];
            }
            coef /= self.singular_values[k];
            for i in 0..self.cols {
                out[i] += coef * self.v[(i, k)];
            }
        }
        out
    }

    /// Materializes B† (cols × rows).
    pub fn matrix(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.cols, self.rows);
        for k in 0..self.rank {
            let s_inv = 1.0 / self.singular_values[k];
            for i in 0..self.cols {
                let vik = self.v[(i, k)] * s_inv;
                if vik == 0.0 {
                    continue;
                }
                for j in 0..self.rows {
                    out[(i, j)] += vik * self.u[(j, k)];
                }
            }
        }
        out
    }

    /// Materializes the rank-truncated reconstruction `U_r Σ_r V_rᵀ` of B.
    pub fn reconstruct(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows, self.cols);
        for k in 0..self.rank {
            let s = self.singular_values[k];
            for i in 0..self.rows {
                let uik = self.u[(i, k)] * s;
                if uik == 0.0 {
                    continue;
                }
                for j in 0..self.cols {
                    out[(i, j)] += uik * self.v[(j, k)];
                }
            }
        }
        out
    }
}

/// Tolerance-controlled pseudo-inverse of a general dense matrix.
pub fn pseudo_inverse(
    b: &DenseMatrix,
    rel_tol: f64,
) -> Result<PseudoInverseFactors, LinalgError> {
    if !b.is_finite() {
        return Err(LinalgError::NonFinite { row: 0, col: 0 });
    }
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(LinalgError::InvalidTolerance(rel_tol));
    }
    let (rows, cols) = (b.rows(), b.cols());
    let wide = rows < cols;
    let svd = if wide {
        svd_tall(&b.transpose())?
    } else {
        svd_tall(b)?
    };
    let (u, v) = if wide { (svd.v, svd.u) } else { (svd.u, svd.v) };
    let sigma_max = svd.singular_values.first().copied().unwrap_or(0.0);
    let cutoff = rel_tol * sigma_max;
    let rank = svd
        .singular_values
        .iter()
        .take_while(|&&s| s > cutoff && s > 0.0)
        .count();
    Ok(PseudoInverseFactors {
        rows,
        cols,
        u,
        v,
        singular_values: svd.singular_values,
        rank,
        cutoff,
    })
}

/// Pseudo-inverse of a symmetric matrix through its eigendecomposition,
/// preserving eigenvalue signs. The cutoff is `rel_tol × max |λ|`.
pub fn pseudo_inverse_symmetric(
    b: &DenseMatrix,
    rel_tol: f64,
) -> Result<PseudoInverseFactors, LinalgError> {
    pseudo_inverse_symmetric_with_floor(b, rel_tol, 0.0)
}

/// Symmetric pseudo-inverse with an additional absolute eigenvalue floor.
/// The floor guards matrices that are numerically zero relative to an
/// upstream scale: a purely relative cutoff would invert their round-off.
pub fn pseudo_inverse_symmetric_with_floor(
    b: &DenseMatrix,
    rel_tol: f64,
    abs_floor: f64,
) -> Result<PseudoInverseFactors, LinalgError> {
    let eig = symmetric_eigen(b)?;
    pseudo_inverse_from_eigen(&eig, rel_tol, abs_floor)
}

/// Builds pseudo-inverse factors from an existing eigendecomposition.
pub fn pseudo_inverse_from_eigen(
    eig: &crate::linalg::SymmetricEigen,
    rel_tol: f64,
    abs_floor: f64,
) -> Result<PseudoInverseFactors, LinalgError> {
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(LinalgError::InvalidTolerance(rel_tol));
    }
    let n = eig.values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.values[j]
            .abs()
            .partial_cmp(&eig.values[i].abs())
            .unwrap()
    });
    let max_abs = order.first().map_or(0.0, |&i| eig.values[i].abs());
    let cutoff = (rel_tol * max_abs).max(abs_floor);
    let mut u = DenseMatrix::zeros(n, n);
    let mut v = DenseMatrix::zeros(n, n);
    let mut singular_values = Vec::with_capacity(n);
    for (new_j, &old_j) in order.iter().enumerate() {
        let lam = eig.values[old_j];
        singular_values.push(lam.abs());
        let sign = if lam < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            // Sign goes into U so that the factors satisfy B = U Σ Vᵀ.
            u[(i, new_j)] = sign * eig.vectors[(i, old_j)];
            v[(i, new_j)] = eig.vectors[(i, old_j)];
        }
    }
    let rank = singular_values
        .iter()
        .take_while(|&&s| s > cutoff && s > 0.0)
        .count();
    Ok(PseudoInverseFactors {
        rows: n,
        cols: n,
        u,
        v,
        singular_values,
        rank,
        cutoff,
    })
}
