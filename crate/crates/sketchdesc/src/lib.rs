//! Experiment harness and CLI plumbing for the sketch-descent solvers:
//! problem/distribution wiring, diagnostics reports, multi-seed experiment
//! grids with CSV/JSON artifacts.

pub mod cli;
pub mod experiments;
pub mod report;
pub mod spec;

/// Worker-pool size: `SKETCHDESC_THREADS` overrides available parallelism.
pub fn worker_threads() -> usize {
    std::env::var("SKETCHDESC_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&v| v > 0)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

/// A rayon pool sized by [`worker_threads`]; results must not depend on
/// scheduling, only on collection order.
pub fn build_pool() -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(worker_threads())
        .build()
        .expect("thread pool")
}
