//! Slice-level vector kernels.
//!
//! Every O(n) helper reports to a thread-local dense-operation counter. The
//! sparse-update solvers are required to perform no dense vector work between
//! recording points outside the gradient oracle; tests assert that through
//! [`dense_op_count`]. Oracle calls run inside a [`pause_dense_ops`] scope so
//! their internal dense work is not charged to the solver.

use std::cell::Cell;

thread_local! {
    static DENSE_OPS: Cell<u64> = const { Cell::new(0) };
    static PAUSE_DEPTH: Cell<u32> = const { Cell::new(0) };
}

/// Number of dense vector operations recorded on this thread.
pub fn dense_op_count() -> u64 {
    DENSE_OPS.with(|c| c.get())
}

/// Resets this thread's dense-operation counter to zero.
pub fn reset_dense_op_count() {
    DENSE_OPS.with(|c| c.set(0));
}

pub(crate) fn note_dense_op() {
    PAUSE_DEPTH.with(|p| {
        if p.get() == 0 {
            DENSE_OPS.with(|c| c.set(c.get() + 1));
        }
    });
}

/// Suspends dense-op counting until the guard is dropped. Nestable.
pub struct DenseOpsPause(());

pub fn pause_dense_ops() -> DenseOpsPause {
    PAUSE_DEPTH.with(|p| p.set(p.get() + 1));
    DenseOpsPause(())
}

impl Drop for DenseOpsPause {
    fn drop(&mut self) {
        PAUSE_DEPTH.with(|p| p.set(p.get() - 1));
    }
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    note_dense_op();
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// y += alpha * x
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    note_dense_op();
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale(alpha: f64, x: &mut [f64]) {
    note_dense_op();
    for xi in x.iter_mut() {
        *xi *= alpha;
    }
}

/// a*x + b*y as a new vector.
pub fn lincomb2(a: f64, x: &[f64], b: f64, y: &[f64]) -> Vec<f64> {
    debug_assert_eq!(x.len(), y.len());
    note_dense_op();
    x.iter().zip(y).map(|(xi, yi)| a * xi + b * yi).collect()
}

pub fn sub(x: &[f64], y: &[f64]) -> Vec<f64> {
    debug_assert_eq!(x.len(), y.len());
    note_dense_op();
    x.iter().zip(y).map(|(xi, yi)| xi - yi).collect()
}

pub fn inf_norm(x: &[f64]) -> f64 {
    note_dense_op();
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn norm2(x: &[f64]) -> f64 {
    dot(x, x).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counter_tracks_and_pauses() {
        reset_dense_op_count();
        let x = vec![1.0, 2.0];
        let mut y = vec![0.0, 0.0];
        axpy(2.0, &x, &mut y);
        assert_eq!(dense_op_count(), 1);
        {
            let _pause = pause_dense_ops();
            axpy(1.0, &x, &mut y);
            assert_eq!(dense_op_count(), 1);
        }
        let _ = dot(&x, &y);
        assert_eq!(dense_op_count(), 2);
    }

    #[test]
    fn lincomb_matches_axpy_route() {
        let x = vec![1.0, -2.0, 3.0];
        let y = vec![0.5, 0.5, 0.5];
        let z = lincomb2(2.0, &x, -1.0, &y);
        assert_eq!(z, vec![1.5, -4.5, 5.5]);
    }
}
