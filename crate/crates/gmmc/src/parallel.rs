//! Multi-threaded gradient evaluation with a fixed reduction order.

use std::num::NonZeroUsize;
use std::thread;

use gmmc_core::gmm::GmmParams;
use gmmc_core::reduction::ReductionMap;
use gmmc_core::training::{self, GradientEvaluator, Gradients, CHUNK_ROWS};
use gmmc_core::Matrix;

/// Env var capping the worker count.
pub const THREADS_ENV: &str = "GMMC_THREADS";

/// Splits a batch into the same fixed chunks as the serial evaluator and
/// sums the chunk results in chunk order, so results do not depend on the
/// thread count.
#[derive(Debug, Clone, Copy)]
pub struct ThreadedEvaluator {
    threads: usize,
}

impl ThreadedEvaluator {
    pub fn new(threads: usize) -> Self {
        Self { threads: threads.max(1) }
    }

    /// Worker count from `GMMC_THREADS`, else the available parallelism.
    pub fn from_env() -> Self {
        let threads = std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&t| t > 0)
            .unwrap_or_else(|| thread::available_parallelism().map_or(1, NonZeroUsize::get));
        Self::new(threads)
    }

    pub fn threads(&self) -> usize {
        self.threads
    }
}

impl GradientEvaluator for ThreadedEvaluator {
    fn evaluate(
        &self,
        params: &GmmParams,
        reduction: Option<&ReductionMap>,
        features: &Matrix,
        labels: &[usize],
        rows: &[usize],
    ) -> (f64, Gradients) {
        let chunks: Vec<&[usize]> = rows.chunks(CHUNK_ROWS).collect();
        let workers = self.threads.min(chunks.len());
        if workers <= 1 {
            return training::SerialEvaluator.evaluate(params, reduction, features, labels, rows);
        }
        let mut slots: Vec<Option<(f64, Gradients)>> = (0..chunks.len()).map(|_| None).collect();
        thread::scope(|s| {
            let per = chunks.len().div_ceil(workers);
            for (slot_group, chunk_group) in slots.chunks_mut(per).zip(chunks.chunks(per)) {
                s.spawn(move || {
                    for (slot, chunk) in slot_group.iter_mut().zip(chunk_group) {
                        *slot = Some(training::chunk_sums(params, reduction, features, labels, chunk));
                    }
                });
            }
        });
        let parts = slots.into_iter().map(|s| s.expect("every chunk evaluated")).collect();
        training::combine_chunks(parts, rows.len())
    }
}
