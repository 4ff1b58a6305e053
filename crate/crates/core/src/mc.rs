//! Parallel path loops with worker-count independent results.

use rayon::prelude::*;

/// Evaluates `f` for every path index in `0..n_paths` in parallel and returns
/// the results in index order. Reductions over the returned vector are
/// therefore identical for any thread count.
pub fn par_map_paths<T, F>(n_paths: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    (0..n_paths as u64).into_par_iter().map(f).collect()
}

/// Same as [`par_map_paths`] but fallible; the first error by index wins.
pub fn try_par_map_paths<T, E, F>(n_paths: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(u64) -> Result<T, E> + Sync + Send,
{
    (0..n_paths as u64).into_par_iter().map(f).collect()
}
