//! Execution policy for data-parallel loops.
//!
//! Every parallel map in the crate goes through [`map_indexed`], which
//! returns results in index order. Reductions are then done sequentially,
//! so results are bit-identical for any worker count.

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "BANDMESO_WORKERS";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    Parallel { workers: usize },
}

impl Execution {
    /// `workers <= 1` selects the sequential path.
    pub fn with_workers(workers: usize) -> Self {
        if workers <= 1 {
            Execution::Sequential
        } else {
            Execution::Parallel { workers }
        }
    }

    /// Reads [`WORKERS_ENV`]; falls back to the available parallelism.
    pub fn from_env() -> Self {
        let workers = std::env::var(WORKERS_ENV)
            .ok()
            .and_then(|s| s.trim().parse::<usize>().ok())
            .unwrap_or_else(|| {
                std::thread::available_parallelism()
                    .map(|n| n.get())
                    .unwrap_or(1)
            });
        Self::with_workers(workers)
    }

    pub fn workers(&self) -> usize {
        match *self {
            Execution::Sequential => 1,
            Execution::Parallel { workers } => workers,
        }
    }
}

impl Default for Execution {
    fn default() -> Self {
        Execution::Sequential
    }
}

/// Evaluates `f(0), .., f(n-1)` and returns them in index order.
pub fn map_indexed<T, F>(exec: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        Execution::Sequential => (0..n).map(f).collect(),
        Execution::Parallel { workers } => parallel_map(workers, n, f),
    }
}

#[cfg(feature = "parallel")]
fn parallel_map<T, F>(workers: usize, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(|| (0..n).into_par_iter().map(&f).collect()),
        Err(_) => (0..n).map(f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<T, F>(_workers: usize, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// True when the crate was built with the rayon backend.
pub fn parallel_enabled() -> bool {
    cfg!(feature = "parallel")
}
