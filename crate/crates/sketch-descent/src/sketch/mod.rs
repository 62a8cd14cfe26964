//! Sketch distributions and realized sketch matrices.
//!
//! A sketch sample is an n×p matrix S restricting one update to range(S).
//! Identity-column samples are kept as index sets so downstream code can use
//! gather/scatter instead of dense products; the generic column families carry
//! their basis matrix by reference, which makes the "orthogonal basis"
//! variants a configuration rather than a separate code path.
//!
//! Distributions are seedable and reproducible: the same seed yields the same
//! sample sequence. Finite families can enumerate their full support with
//! probabilities for exact expectation computations.

mod checks;

pub use checks::{check_nontrivial_kernel, check_span_condition, SpanCheckMode, SpanReport};

use crate::linalg::{kernel_basis, DenseMatrix, LinalgError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SketchError {
    #[error("distribution has no finite support to enumerate")]
    UnsupportedEnumeration,
    #[error("support too large to enumerate ({0} atoms)")]
    SupportTooLarge(u128),
    #[error("invalid sketch configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// One realized sketch matrix.
#[derive(Debug, Clone)]
pub enum SketchSample {
    /// Columns of a basis matrix, selected by distinct indices. `basis: None`
    /// means columns of the identity, which is the sparse fast path.
    Columns {
        n: usize,
        indices: Vec<usize>,
        basis: Option<Arc<DenseMatrix>>,
    },
    /// A dense n×p matrix.
    Dense(DenseMatrix),
}

impl SketchSample {
    pub fn identity_columns(n: usize, indices: Vec<usize>) -> Self {
        debug_assert!(indices.iter().all(|&i| i < n));
        SketchSample::Columns {
            n,
            indices,
            basis: None,
        }
    }

    /// Ambient dimension n.
    pub fn n(&self) -> usize {
        match self {
            SketchSample::Columns { n, .. } => *n,
            SketchSample::Dense(m) => m.rows(),
        }
    }

    /// Sketch width p.
    pub fn width(&self) -> usize {
        match self {
            SketchSample::Columns { indices, .. } => indices.len(),
            SketchSample::Dense(m) => m.cols(),
        }
    }

    /// True for identity-column samples, whose image touches only `width()`
    /// coordinates.
    pub fn is_coordinate_sparse(&self) -> bool {
        matches!(self, SketchSample::Columns { basis: None, .. })
    }

    pub fn indices(&self) -> Option<&[usize]> {
        match self {
            SketchSample::Columns { indices, .. } => Some(indices),
            SketchSample::Dense(_) => None,
        }
    }

    /// Materializes S as a dense n×p matrix.
    pub fn to_dense(&self) -> DenseMatrix {
        match self {
            SketchSample::Dense(m) => m.clone(),
            SketchSample::Columns { n, indices, basis } => {
                let mut s = DenseMatrix::zeros(*n, indices.len());
                match basis {
                    None => {
                        for (j, &i) in indices.iter().enumerate() {
                            s[(i, j)] = 1.0;
                        }
                    }
                    Some(b) => {
                        for (j, &i) in indices.iter().enumerate() {
                            for r in 0..*n {
                                s[(r, j)] = b[(r, i)];
                            }
                        }
                    }
                }
                s
            }
        }
    }

    /// Sᵀ g.
    pub fn gather(&self, g: &[f64]) -> Vec<f64> {
        debug_assert_eq!(g.len(), self.n());
        match self {
            SketchSample::Columns {
                indices,
                basis: None,
                ..
            } => indices.iter().map(|&i| g[i]).collect(),
            SketchSample::Columns {
                indices,
                basis: Some(b),
                n,
            } => indices
                .iter()
                .map(|&col| (0..*n).map(|r| b[(r, col)] * g[r]).sum())
                .collect(),
            SketchSample::Dense(m) => m.tr_matvec(g),
        }
    }

    /// out += S w.
    pub fn scatter_add(&self, w: &[f64], out: &mut [f64]) {
        debug_assert_eq!(w.len(), self.width());
        debug_assert_eq!(out.len(), self.n());
        match self {
            SketchSample::Columns {
                indices,
                basis: None,
                ..
            } => {
                for (j, &i) in indices.iter().enumerate() {
                    out[i] += w[j];
                }
            }
            SketchSample::Columns {
                indices,
                basis: Some(b),
                n,
            } => {
                for (j, &col) in indices.iter().enumerate() {
                    let wj = w[j];
                    if wj != 0.0 {
                        for r in 0..*n {
                            out[r] += wj * b[(r, col)];
                        }
                    }
                }
            }
            SketchSample::Dense(m) => {
                let sw = m.matvec(w);
                for (o, v) in out.iter_mut().zip(sw) {
                    *o += v;
                }
            }
        }
    }

    /// SᵀS (identity for identity-column samples).
    pub fn gram(&self) -> DenseMatrix {
        match self {
            SketchSample::Columns {
                indices,
                basis: None,
                ..
            } => DenseMatrix::identity(indices.len()),
            _ => {
                let s = self.to_dense();
                s.transpose().matmul(&s)
            }
        }
    }
}

/// How the fixed consecutive-pair family picks its next sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PartitionMode {
    /// Deterministic cycle i = k mod (n−1) over pairs (i, i+1).
    #[default]
    Cyclic,
    /// Uniform random pair from the partition.
    Uniform,
}

/// The sketch families.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SketchKind {
    /// Consecutive coordinate pairs (i, i+1), i = 1..n−1.
    FixedPartitionPairs {
        #[serde(default)]
        mode: PartitionMode,
    },
    /// Uniformly random p-subsets of basis columns.
    RandomTuples { p: usize },
    /// Coordinate pairs (i, j), i<j, drawn with probability
    /// (L_i + L_j) / ((n−1) L), L = Σ L_i.
    LipschitzWeightedPairs { lipschitz: Vec<f64> },
    /// Blocks of p consecutive columns of an orthonormal kernel basis of A;
    /// every sample satisfies A·S = 0.
    KernelBasisBlocks { p: usize },
    /// Dense n×p with i.i.d. standard normal entries.
    GaussianDense { p: usize },
    /// Dense n×p with i.i.d. Uniform(−1, 1) entries.
    UniformDense { p: usize },
}

impl SketchKind {
    pub fn is_enumerable(&self) -> bool {
        !matches!(
            self,
            SketchKind::GaussianDense { .. } | SketchKind::UniformDense { .. }
        )
    }

    /// Dense continuous families need p > m to intersect ker(A) generically.
    pub fn requires_width_exceeding_m(&self) -> Option<usize> {
        match self {
            SketchKind::GaussianDense { p } | SketchKind::UniformDense { p } => Some(*p),
            _ => None,
        }
    }
}

/// A seedable sketch distribution bound to an ambient dimension.
#[derive(Debug, Clone)]
pub struct SketchDistribution {
    kind: SketchKind,
    n: usize,
    seed: u64,
    rng: ChaCha8Rng,
    cycle: usize,
    /// Cumulative weights for the Lipschitz pair family, atoms in (i, j)
    /// lexicographic order.
    pair_cdf: Option<Arc<Vec<f64>>>,
    /// Kernel basis for the kernel-block family.
    kernel: Option<Arc<DenseMatrix>>,
    /// Optional non-identity column basis for tuple families.
    basis: Option<Arc<DenseMatrix>>,
}

impl SketchDistribution {
    /// Builds a distribution. `a` is required for `KernelBasisBlocks`.
    pub fn new(
        kind: SketchKind,
        n: usize,
        seed: u64,
        a: Option<&DenseMatrix>,
    ) -> Result<Self, SketchError> {
        if n < 2 {
            return Err(SketchError::InvalidConfig(
                "ambient dimension must be at least 2".into(),
            ));
        }
        let mut pair_cdf = None;
        let mut kernel = None;
        match &kind {
            SketchKind::FixedPartitionPairs { .. } => {}
            SketchKind::RandomTuples { p } => {
                if *p == 0 || *p > n {
                    return Err(SketchError::InvalidConfig(format!(
                        "tuple width {p} out of range for n={n}"
                    )));
                }
            }
            SketchKind::LipschitzWeightedPairs { lipschitz } => {
                if lipschitz.len() != n {
                    return Err(SketchError::InvalidConfig(format!(
                        "need {n} Lipschitz weights, got {}",
                        lipschitz.len()
                    )));
                }
                if lipschitz.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
                    return Err(SketchError::InvalidConfig(
                        "Lipschitz weights must be positive and finite".into(),
                    ));
                }
                let mut cdf = Vec::with_capacity(n * (n - 1) / 2);
                let total: f64 = lipschitz.iter().sum::<f64>() * (n as f64 - 1.0);
                let mut acc = 0.0;
                for i in 0..n {
                    for j in (i + 1)..n {
                        acc += (lipschitz[i] + lipschitz[j]) / total;
                        cdf.push(acc);
                    }
                }
                // Atom weights sum to 1 analytically; pin the tail exactly.
                let last = cdf.last_mut().expect("n >= 2");
                debug_assert!((*last - 1.0).abs() < 1e-12);
                *last = 1.0;
                pair_cdf = Some(Arc::new(cdf));
            }
            SketchKind::KernelBasisBlocks { p } => {
                let a = a.ok_or_else(|| {
                    SketchError::InvalidConfig(
                        "kernel-basis blocks need the constraint matrix".into(),
                    )
                })?;
                let basis = kernel_basis(a, crate::linalg::DEFAULT_RANK_TOL)?;
                if basis.dim() == 0 {
                    return Err(SketchError::InvalidConfig(
                        "constraint matrix has a trivial kernel".into(),
                    ));
                }
                if *p == 0 || *p > basis.dim() {
                    return Err(SketchError::InvalidConfig(format!(
                        "block width {p} out of range for kernel dimension {}",
                        basis.dim()
                    )));
                }
                kernel = Some(Arc::new(basis.columns().clone()));
            }
            SketchKind::GaussianDense { p } | SketchKind::UniformDense { p } => {
                if *p == 0 {
                    return Err(SketchError::InvalidConfig("width must be positive".into()));
                }
            }
        }
        Ok(Self {
            kind,
            n,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            cycle: 0,
            pair_cdf,
            kernel,
            basis: None,
        })
    }

    /// Replaces the identity column basis of tuple families with the columns
    /// of a full-rank matrix.
    pub fn with_column_basis(mut self, basis: DenseMatrix) -> Result<Self, SketchError> {
        if basis.rows() != self.n || basis.cols() != self.n {
            return Err(SketchError::InvalidConfig(format!(
                "column basis must be {0}x{0}",
                self.n
            )));
        }
        self.basis = Some(Arc::new(basis));
        Ok(self)
    }

    pub fn kind(&self) -> &SketchKind {
        &self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn is_enumerable(&self) -> bool {
        self.kind.is_enumerable()
    }

    /// A fresh copy whose sample stream is determined by `seed` alone.
    pub fn reseeded(&self, seed: u64) -> Self {
        let mut d = self.clone();
        d.seed = seed;
        d.rng = ChaCha8Rng::seed_from_u64(seed);
        d.cycle = 0;
        d
    }

    fn wrap_columns(&self, indices: Vec<usize>) -> SketchSample {
        SketchSample::Columns {
            n: self.n,
            indices,
            basis: self.basis.clone(),
        }
    }

    /// Draws the next sample.
    pub fn sample(&mut self) -> SketchSample {
        let n = self.n;
        match &self.kind {
            SketchKind::FixedPartitionPairs { mode } => {
                let i = match mode {
                    PartitionMode::Cyclic => {
                        let i = self.cycle % (n - 1);
                        self.cycle += 1;
                        i
                    }
                    PartitionMode::Uniform => self.rng.gen_range(0..n - 1),
                };
                self.wrap_columns(vec![i, i + 1])
            }
            SketchKind::RandomTuples { p } => {
                let idx = sample_distinct(&mut self.rng, n, *p);
                self.wrap_columns(idx)
            }
            SketchKind::LipschitzWeightedPairs { .. } => {
                let cdf = self.pair_cdf.as_ref().expect("built in constructor");
                let u: f64 = self.rng.gen();
                let at = cdf.partition_point(|&c| c < u).min(cdf.len() - 1);
                let (i, j) = pair_from_rank(n, at);
                self.wrap_columns(vec![i, j])
            }
            SketchKind::KernelBasisBlocks { p } => {
                let kernel = self.kernel.clone().expect("built in constructor");
                let blocks = block_starts(kernel.cols(), *p);
                let b = blocks[self.rng.gen_range(0..blocks.len())];
                let indices = (b..(b + p).min(kernel.cols())).collect();
                SketchSample::Columns {
                    n,
                    indices,
                    basis: Some(kernel),
                }
            }
            SketchKind::GaussianDense { p } => {
                let p = *p;
                let mut data = Vec::with_capacity(n * p);
                for _ in 0..n * p {
                    data.push(standard_normal(&mut self.rng));
                }
                SketchSample::Dense(DenseMatrix::from_row_major(n, p, data))
            }
            SketchKind::UniformDense { p } => {
                let p = *p;
                let mut data = Vec::with_capacity(n * p);
                for _ in 0..n * p {
                    data.push(self.rng.gen_range(-1.0..1.0));
                }
                SketchSample::Dense(DenseMatrix::from_row_major(n, p, data))
            }
        }
    }

    /// Exhaustive support with probabilities (finite families only).
    /// Probabilities sum to 1 within 1e-12.
    pub fn enumerate_support(&self) -> Result<Vec<(SketchSample, f64)>, SketchError> {
        const MAX_ATOMS: u128 = 5_000_000;
        let n = self.n;
        match &self.kind {
            SketchKind::FixedPartitionPairs { .. } => {
                let prob = 1.0 / (n as f64 - 1.0);
                Ok((0..n - 1)
                    .map(|i| (self.wrap_columns(vec![i, i + 1]), prob))
                    .collect())
            }
            SketchKind::RandomTuples { p } => {
                let count = binomial(n as u128, *p as u128);
                if count > MAX_ATOMS {
                    return Err(SketchError::SupportTooLarge(count));
                }
                let prob = 1.0 / count as f64;
                let mut out = Vec::with_capacity(count as usize);
                let mut idx: Vec<usize> = (0..*p).collect();
                loop {
                    out.push((self.wrap_columns(idx.clone()), prob));
                    if !next_combination(&mut idx, n) {
                        break;
                    }
                }
                Ok(out)
            }
            SketchKind::LipschitzWeightedPairs { lipschitz } => {
                let total: f64 = lipschitz.iter().sum::<f64>() * (n as f64 - 1.0);
                let mut out = Vec::with_capacity(n * (n - 1) / 2);
                for i in 0..n {
                    for j in (i + 1)..n {
                        let prob = (lipschitz[i] + lipschitz[j]) / total;
                        out.push((self.wrap_columns(vec![i, j]), prob));
                    }
                }
                Ok(out)
            }
            SketchKind::KernelBasisBlocks { p } => {
                let kernel = self.kernel.clone().expect("built in constructor");
                let blocks = block_starts(kernel.cols(), *p);
                let prob = 1.0 / blocks.len() as f64;
                Ok(blocks
                    .into_iter()
                    .map(|b| {
                        let indices = (b..(b + p).min(kernel.cols())).collect();
                        (
                            SketchSample::Columns {
                                n,
                                indices,
                                basis: Some(kernel.clone()),
                            },
                            prob,
                        )
                    })
                    .collect())
            }
            SketchKind::GaussianDense { .. } | SketchKind::UniformDense { .. } => {
                Err(SketchError::UnsupportedEnumeration)
            }
        }
    }
}

/// Box–Muller transform; consumes two uniforms per variate.
fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = loop {
        let u: f64 = rng.gen();
        if u > 0.0 {
            break u;
        }
    };
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
}

/// Floyd's algorithm: p distinct indices from 0..n, returned sorted.
fn sample_distinct(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Vec<usize> {
    let mut chosen: Vec<usize> = Vec::with_capacity(p);
    for j in (n - p)..n {
        let t = rng.gen_range(0..=j);
        if chosen.contains(&t) {
            chosen.push(j);
        } else {
            chosen.push(t);
        }
    }
    chosen.sort_unstable();
    chosen
}

/// Inverse of the lexicographic rank of pairs (i, j), i < j.
fn pair_from_rank(n: usize, rank: usize) -> (usize, usize) {
    let mut r = rank;
    for i in 0..n - 1 {
        let row = n - 1 - i;
        if r < row {
            return (i, i + 1 + r);
        }
        r -= row;
    }
    unreachable!("rank out of range")
}

fn block_starts(dim: usize, p: usize) -> Vec<usize> {
    (0..dim).step_by(p).collect()
}

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

/// Advances a sorted index combination to its lexicographic successor.
fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let p = idx.len();
    let mut i = p;
    while i > 0 {
        i -= 1;
        if idx[i] < n - p + i {
            idx[i] += 1;
            for j in i + 1..p {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_partition_cycles_deterministically() {
        let mut d = SketchDistribution::new(
            SketchKind::FixedPartitionPairs {
                mode: PartitionMode::Cyclic,
            },
            5,
            0,
            None,
        )
        .unwrap();
        // cycle position k = 2 selects indices (2, 3), i.e. columns e_3, e_4.
        let _ = d.sample();
        let _ = d.sample();
        let s = d.sample();
        assert_eq!(s.indices().unwrap(), &[2, 3]);
        let s = d.sample();
        assert_eq!(s.indices().unwrap(), &[3, 4]);
        let s = d.sample();
        assert_eq!(s.indices().unwrap(), &[0, 1]);
    }

    #[test]
    fn equal_lipschitz_pairs_are_uniform() {
        let d = SketchDistribution::new(
            SketchKind::LipschitzWeightedPairs {
                lipschitz: vec![1.0; 3],
            },
            3,
            0,
            None,
        )
        .unwrap();
        let support = d.enumerate_support().unwrap();
        assert_eq!(support.len(), 3);
        for (_, prob) in &support {
            assert!((prob - 1.0 / 3.0).abs() < 1e-15);
        }
        let total: f64 = support.iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_samples_repeat_under_the_same_seed() {
        let kind = SketchKind::GaussianDense { p: 2 };
        let mut d1 = SketchDistribution::new(kind.clone(), 4, 7, None).unwrap();
        let mut d2 = SketchDistribution::new(kind, 4, 7, None).unwrap();
        for _ in 0..3 {
            let (s1, s2) = (d1.sample(), d2.sample());
            match (s1, s2) {
                (SketchSample::Dense(a), SketchSample::Dense(b)) => {
                    assert_eq!(a.rows(), 4);
                    assert_eq!(a.cols(), 2);
                    assert_eq!(a.data(), b.data(), "same seed must be bitwise identical");
                }
                _ => panic!("expected dense samples"),
            }
        }
    }

    #[test]
    fn fixed_partition_support_is_uniform_over_consecutive_pairs() {
        let d = SketchDistribution::new(
            SketchKind::FixedPartitionPairs {
                mode: PartitionMode::Cyclic,
            },
            4,
            0,
            None,
        )
        .unwrap();
        let support = d.enumerate_support().unwrap();
        assert_eq!(support.len(), 3);
        for (k, (s, prob)) in support.iter().enumerate() {
            assert_eq!(s.indices().unwrap(), &[k, k + 1]);
            assert!((prob - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn uniform_tuples_enumerate_all_subsets() {
        let d = SketchDistribution::new(SketchKind::RandomTuples { p: 2 }, 4, 0, None).unwrap();
        let support = d.enumerate_support().unwrap();
        assert_eq!(support.len(), 6);
        for (_, prob) in &support {
            assert!((prob - 1.0 / 6.0).abs() < 1e-15);
        }
        let total: f64 = support.iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn continuous_families_refuse_enumeration() {
        let d = SketchDistribution::new(SketchKind::GaussianDense { p: 2 }, 4, 0, None).unwrap();
        assert!(matches!(
            d.enumerate_support(),
            Err(SketchError::UnsupportedEnumeration)
        ));
    }

    #[test]
    fn kernel_blocks_are_annihilated_by_a() {
        let a = DenseMatrix::from_rows(&[vec![1.0; 6]]).unwrap();
        let mut d =
            SketchDistribution::new(SketchKind::KernelBasisBlocks { p: 2 }, 6, 3, Some(&a))
                .unwrap();
        for _ in 0..8 {
            let s = d.sample().to_dense();
            let prod = a.matmul(&s);
            assert!(prod.max_abs() < 1e-12);
        }
    }

    #[test]
    fn empirical_pair_frequencies_match_declared_probabilities() {
        // 1e5 seeded draws; each atom's frequency within 3 standard errors.
        let lipschitz = vec![1.0, 2.0, 3.0, 4.0];
        let n = 4;
        let mut d = SketchDistribution::new(
            SketchKind::LipschitzWeightedPairs {
                lipschitz: lipschitz.clone(),
            },
            n,
            123,
            None,
        )
        .unwrap();
        let support = d.enumerate_support().unwrap();
        let draws = 100_000usize;
        let mut counts = vec![0usize; support.len()];
        for _ in 0..draws {
            let s = d.sample();
            let idx = s.indices().unwrap();
            let rank = support
                .iter()
                .position(|(atom, _)| atom.indices().unwrap() == idx)
                .unwrap();
            counts[rank] += 1;
        }
        for (rank, (_, prob)) in support.iter().enumerate() {
            let freq = counts[rank] as f64 / draws as f64;
            let se = (prob * (1.0 - prob) / draws as f64).sqrt();
            assert!(
                (freq - prob).abs() <= 3.0 * se,
                "atom {rank}: freq {freq} vs prob {prob} (se {se})"
            );
        }
    }

    #[test]
    fn distinct_index_sampler_is_in_range_and_sorted() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let idx = sample_distinct(&mut rng, 10, 4);
            assert_eq!(idx.len(), 4);
            assert!(idx.windows(2).all(|w| w[0] < w[1]));
            assert!(idx.iter().all(|&i| i < 10));
        }
    }

    #[test]
    fn pair_rank_roundtrip() {
        let n = 7;
        let mut rank = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                assert_eq!(pair_from_rank(n, rank), (i, j));
                rank += 1;
            }
        }
    }
}
