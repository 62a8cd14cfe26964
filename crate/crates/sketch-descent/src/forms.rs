//! Structured symmetric matrices for curvature data.
//!
//! Smoothness bounds M, strong-convexity bounds G and quadratic Hessians all
//! enter the algorithms only through matrix-vector products, quadratic forms
//! and the small compressions SᵀMS, so they are carried in whichever
//! structured form keeps those operations linear in n.

use crate::linalg::{symmetric_eigen, DenseMatrix, LinalgError};
use crate::sketch::SketchSample;
use crate::vecops;

/// A symmetric n×n matrix in structured form.
#[derive(Debug, Clone)]
pub enum SymmetricForm {
    Dense(DenseMatrix),
    /// FᵀF + ridge·I with F of shape q×n.
    Factored { factor: DenseMatrix, ridge: f64 },
    Diagonal(Vec<f64>),
    ScaledIdentity { n: usize, lambda: f64 },
    /// diag·I + outer·eeᵀ.
    SpreadPlusRankOne { n: usize, diag: f64, outer: f64 },
    /// base·I + coeff·(e_i e_jᵀ + e_j e_iᵀ).
    RankTwoCross {
        n: usize,
        base: f64,
        coeff: f64,
        i: usize,
        j: usize,
    },
}

impl SymmetricForm {
    pub fn n(&self) -> usize {
        match self {
            SymmetricForm::Dense(m) => m.rows(),
            SymmetricForm::Factored { factor, .. } => factor.cols(),
            SymmetricForm::Diagonal(d) => d.len(),
            SymmetricForm::ScaledIdentity { n, .. }
            | SymmetricForm::SpreadPlusRankOne { n, .. }
            | SymmetricForm::RankTwoCross { n, .. } => *n,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.n());
        match self {
            SymmetricForm::Dense(m) => m.matvec(x),
            SymmetricForm::Factored { factor, ridge } => {
                let fx = factor.matvec(x);
                let mut out = factor.tr_matvec(&fx);
                if *ridge != 0.0 {
                    vecops::axpy(*ridge, x, &mut out);
                }
                out
            }
            SymmetricForm::Diagonal(d) => {
                vecops::note_dense_op();
                d.iter().zip(x).map(|(di, xi)| di * xi).collect()
            }
            SymmetricForm::ScaledIdentity { lambda, .. } => {
                vecops::note_dense_op();
                x.iter().map(|xi| lambda * xi).collect()
            }
            SymmetricForm::SpreadPlusRankOne { diag, outer, .. } => {
                vecops::note_dense_op();
                let s: f64 = x.iter().sum();
                x.iter().map(|xi| diag * xi + outer * s).collect()
            }
            SymmetricForm::RankTwoCross {
                base, coeff, i, j, ..
            } => {
                vecops::note_dense_op();
                let mut out: Vec<f64> = x.iter().map(|xi| base * xi).collect();
                out[*i] += coeff * x[*j];
                out[*j] += coeff * x[*i];
                out
            }
        }
    }

    /// xᵀ M x.
    pub fn quad(&self, x: &[f64]) -> f64 {
        let mx = self.matvec(x);
        vecops::dot(x, &mx)
    }

    /// SᵀMS for a sketch sample, computed from the structure so the cost is
    /// linear in n.
    pub fn gram(&self, s: &SketchSample) -> DenseMatrix {
        let p = s.width();
        match (self, s) {
            // Identity-column fast paths.
            (
                SymmetricForm::Dense(m),
                SketchSample::Columns {
                    indices,
                    basis: None,
                    ..
                },
            ) => DenseMatrix::from_fn(p, p, |a, b| m[(indices[a], indices[b])]),
            (
                SymmetricForm::Diagonal(d),
                SketchSample::Columns {
                    indices,
                    basis: None,
                    ..
                },
            ) => {
                let mut g = DenseMatrix::zeros(p, p);
                for (a, &i) in indices.iter().enumerate() {
                    g[(a, a)] = d[i];
                }
                g
            }
            (
                SymmetricForm::Factored { factor, ridge },
                SketchSample::Columns {
                    indices,
                    basis: None,
                    ..
                },
            ) => {
                // (FS) columns are gathered columns of F.
                let q = factor.rows();
                let fs = DenseMatrix::from_fn(q, p, |r, c| factor[(r, indices[c])]);
                let mut g = fs.transpose().matmul(&fs);
                for a in 0..p {
                    g[(a, a)] += ridge;
                }
                g
            }
            (SymmetricForm::ScaledIdentity { lambda, .. }, _) => s.gram().scaled(*lambda),
            (SymmetricForm::SpreadPlusRankOne { diag, outer, .. }, _) => {
                let ones = vec![1.0; self.n()];
                let se = s.gather(&ones);
                let mut g = s.gram().scaled(*diag);
                for a in 0..p {
                    for b in 0..p {
                        g[(a, b)] += outer * se[a] * se[b];
                    }
                }
                g
            }
            (
                SymmetricForm::RankTwoCross {
                    base, coeff, i, j, ..
                },
                _,
            ) => {
                let n = self.n();
                let mut ei = vec![0.0; n];
                ei[*i] = 1.0;
                let mut ej = vec![0.0; n];
                ej[*j] = 1.0;
                let si = s.gather(&ei);
                let sj = s.gather(&ej);
                let mut g = s.gram().scaled(*base);
                for a in 0..p {
                    for b in 0..p {
                        g[(a, b)] += coeff * (si[a] * sj[b] + sj[a] * si[b]);
                    }
                }
                g
            }
            // Generic dense fallbacks.
            (SymmetricForm::Dense(m), _) => {
                let sd = s.to_dense();
                sd.transpose().matmul(&m.matmul(&sd))
            }
            (SymmetricForm::Factored { factor, ridge }, _) => {
                let sd = s.to_dense();
                let fs = factor.matmul(&sd);
                let mut g = fs.transpose().matmul(&fs);
                let gram = sd.transpose().matmul(&sd);
                g.add_scaled(*ridge, &gram);
                g
            }
            (SymmetricForm::Diagonal(d), _) => {
                let sd = s.to_dense();
                let mut ds = sd.clone();
                for r in 0..ds.rows() {
                    let scale = d[r];
                    for c in 0..ds.cols() {
                        ds[(r, c)] *= scale;
                    }
                }
                sd.transpose().matmul(&ds)
            }
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let n = self.n();
        match self {
            SymmetricForm::Dense(m) => m.clone(),
            SymmetricForm::Factored { factor, ridge } => {
                let mut m = factor.transpose().matmul(factor);
                for i in 0..n {
                    m[(i, i)] += ridge;
                }
                m
            }
            SymmetricForm::Diagonal(d) => {
                let mut m = DenseMatrix::zeros(n, n);
                for (i, &v) in d.iter().enumerate() {
                    m[(i, i)] = v;
                }
                m
            }
            SymmetricForm::ScaledIdentity { lambda, .. } => DenseMatrix::identity(n).scaled(*lambda),
            SymmetricForm::SpreadPlusRankOne { diag, outer, .. } => {
                let mut m = DenseMatrix::from_fn(n, n, |_, _| *outer);
                for i in 0..n {
                    m[(i, i)] += diag;
                }
                m
            }
            SymmetricForm::RankTwoCross {
                base, coeff, i, j, ..
            } => {
                let mut m = DenseMatrix::identity(n).scaled(*base);
                m[(*i, *j)] += coeff;
                m[(*j, *i)] += coeff;
                m
            }
        }
    }

    /// A new form scaled by `c ≥ 0`.
    pub fn scaled(&self, c: f64) -> SymmetricForm {
        assert!(c >= 0.0, "scaling must be nonnegative");
        match self {
            SymmetricForm::Dense(m) => SymmetricForm::Dense(m.scaled(c)),
            SymmetricForm::Factored { factor, ridge } => SymmetricForm::Factored {
                factor: factor.scaled(c.sqrt()),
                ridge: ridge * c,
            },
            SymmetricForm::Diagonal(d) => {
                SymmetricForm::Diagonal(d.iter().map(|v| v * c).collect())
            }
            SymmetricForm::ScaledIdentity { n, lambda } => SymmetricForm::ScaledIdentity {
                n: *n,
                lambda: lambda * c,
            },
            SymmetricForm::SpreadPlusRankOne { n, diag, outer } => {
                SymmetricForm::SpreadPlusRankOne {
                    n: *n,
                    diag: diag * c,
                    outer: outer * c,
                }
            }
            SymmetricForm::RankTwoCross {
                n,
                base,
                coeff,
                i,
                j,
            } => SymmetricForm::RankTwoCross {
                n: *n,
                base: base * c,
                coeff: coeff * c,
                i: *i,
                j: *j,
            },
        }
    }

    /// Largest eigenvalue, closed-form where the structure allows.
    pub fn lambda_max(&self) -> Result<f64, LinalgError> {
        match self {
            SymmetricForm::Dense(m) => Ok(symmetric_eigen(m)?.max()),
            SymmetricForm::Factored { factor, ridge } => {
                // λ_max(FᵀF) = λ_max(FFᵀ); the Gram side is q×q.
                let gram_t = factor.matmul(&factor.transpose());
                Ok(symmetric_eigen(&gram_t)?.max().max(0.0) + ridge)
            }
            SymmetricForm::Diagonal(d) => Ok(d.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))),
            SymmetricForm::ScaledIdentity { lambda, .. } => Ok(*lambda),
            SymmetricForm::SpreadPlusRankOne { n, diag, outer } => {
                Ok(diag + (outer * *n as f64).max(0.0))
            }
            SymmetricForm::RankTwoCross { base, coeff, .. } => Ok(base + coeff.abs()),
        }
    }

    /// Smallest eigenvalue.
    pub fn lambda_min(&self) -> Result<f64, LinalgError> {
        match self {
            SymmetricForm::Dense(m) => Ok(symmetric_eigen(m)?.min()),
            SymmetricForm::Factored { factor, ridge } => {
                if factor.rows() >= factor.cols() {
                    let g = factor.transpose().matmul(factor);
                    Ok(symmetric_eigen(&g)?.min().max(0.0) + ridge)
                } else {
                    // Wide factor: FᵀF is singular.
                    Ok(*ridge)
                }
            }
            SymmetricForm::Diagonal(d) => Ok(d.iter().fold(f64::INFINITY, |m, &v| m.min(v))),
            SymmetricForm::ScaledIdentity { lambda, .. } => Ok(*lambda),
            SymmetricForm::SpreadPlusRankOne { n, diag, outer } => {
                Ok(diag + (outer * *n as f64).min(0.0))
            }
            SymmetricForm::RankTwoCross { base, coeff, .. } => Ok(base - coeff.abs()),
        }
    }
}

/// How the curvature upper bound of the objective is supplied to the
/// operator machinery.
#[derive(Debug, Clone)]
pub enum SmoothnessSpec {
    /// One fixed matrix M valid for every sample.
    Fixed(SymmetricForm),
    /// Per-sample relaxation M_S = λ_max(SᵀBS)·SSᵀ of a base matrix B;
    /// inside the operator this replaces SᵀMS by λ_max(SᵀBS)·I_p.
    PerSketch(SymmetricForm),
}

impl SmoothnessSpec {
    pub fn full(m: DenseMatrix) -> Self {
        SmoothnessSpec::Fixed(SymmetricForm::Dense(m))
    }

    pub fn scaled_identity(n: usize, lambda: f64) -> Self {
        SmoothnessSpec::Fixed(SymmetricForm::ScaledIdentity { n, lambda })
    }

    /// The fixed matrix, when this is not the per-sketch rule.
    pub fn fixed(&self) -> Option<&SymmetricForm> {
        match self {
            SmoothnessSpec::Fixed(m) => Some(m),
            SmoothnessSpec::PerSketch(_) => None,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            SmoothnessSpec::Fixed(m) | SmoothnessSpec::PerSketch(m) => m.n(),
        }
    }

    /// The p×p matrix standing in for SᵀMS inside the step operator.
    pub fn operator_gram(&self, s: &SketchSample) -> Result<DenseMatrix, LinalgError> {
        match self {
            SmoothnessSpec::Fixed(m) => Ok(m.gram(s)),
            SmoothnessSpec::PerSketch(b) => {
                let g = b.gram(s);
                let lam = symmetric_eigen(&g)?.max().max(0.0);
                Ok(DenseMatrix::identity(s.width()).scaled(lam))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn forms_under_test() -> Vec<SymmetricForm> {
        let f = DenseMatrix::from_rows(&[vec![1.0, 0.0, 2.0, -1.0], vec![0.0, 1.0, 1.0, 0.5]])
            .unwrap();
        vec![
            SymmetricForm::Dense(
                DenseMatrix::from_rows(&[
                    vec![2.0, 0.5, 0.0, 0.0],
                    vec![0.5, 1.0, -0.5, 0.0],
                    vec![0.0, -0.5, 3.0, 0.2],
                    vec![0.0, 0.0, 0.2, 1.5],
                ])
                .unwrap(),
            ),
            SymmetricForm::Factored { factor: f, ridge: 0.1 },
            SymmetricForm::Diagonal(vec![1.0, 2.0, 3.0, 0.5]),
            SymmetricForm::ScaledIdentity { n: 4, lambda: 2.5 },
            SymmetricForm::SpreadPlusRankOne {
                n: 4,
                diag: 0.3,
                outer: 0.7,
            },
            SymmetricForm::RankTwoCross {
                n: 4,
                base: 1.0,
                coeff: 0.9,
                i: 0,
                j: 3,
            },
        ]
    }

    #[test]
    fn matvec_matches_dense_route() {
        let x = vec![0.3, -1.2, 2.0, 0.7];
        for form in forms_under_test() {
            let fast = form.matvec(&x);
            let dense = form.to_dense().matvec(&x);
            for (a, b) in fast.iter().zip(&dense) {
                assert!((a - b).abs() < 1e-12, "{form:?}");
            }
        }
    }

    #[test]
    fn gram_matches_dense_route_for_index_and_dense_samples() {
        let samples = [
            SketchSample::identity_columns(4, vec![0, 3]),
            SketchSample::Dense(
                DenseMatrix::from_rows(&[
                    vec![0.4, 1.0],
                    vec![-0.3, 0.2],
                    vec![1.1, -0.6],
                    vec![0.0, 0.9],
                ])
                .unwrap(),
            ),
        ];
        for form in forms_under_test() {
            for s in &samples {
                let fast = form.gram(s);
                let sd = s.to_dense();
                let slow = sd.transpose().matmul(&form.to_dense().matmul(&sd));
                assert!(
                    fast.sub(&slow).max_abs() < 1e-12,
                    "{form:?} gram mismatch {}",
                    fast.sub(&slow).max_abs()
                );
            }
        }
    }

    #[test]
    fn spectral_bounds_match_dense_eigendecomposition() {
        for form in forms_under_test() {
            let dense = form.to_dense();
            let eig = symmetric_eigen(&dense).unwrap();
            assert!((form.lambda_max().unwrap() - eig.max()).abs() < 1e-10, "{form:?}");
            assert!((form.lambda_min().unwrap() - eig.min()).abs() < 1e-10, "{form:?}");
        }
    }

    #[test]
    fn scaling_scales_the_spectrum() {
        for form in forms_under_test() {
            let scaled = form.scaled(2.0);
            let err = scaled.to_dense().sub(&form.to_dense().scaled(2.0)).max_abs();
            assert!(err < 1e-12);
        }
    }

    #[test]
    fn per_sketch_rule_replaces_the_gram_with_a_scaled_identity() {
        let b = SymmetricForm::SpreadPlusRankOne {
            n: 4,
            diag: 0.5,
            outer: 0.5,
        };
        let spec = SmoothnessSpec::PerSketch(b.clone());
        let s = SketchSample::identity_columns(4, vec![1, 2]);
        let g = spec.operator_gram(&s).unwrap();
        // SᵀBS = 0.5 I + 0.5 J (2x2), λ_max = 1.5.
        assert!((g[(0, 0)] - 1.5).abs() < 1e-12);
        assert!((g[(1, 1)] - 1.5).abs() < 1e-12);
        assert!(g[(0, 1)].abs() < 1e-12);
    }
}
