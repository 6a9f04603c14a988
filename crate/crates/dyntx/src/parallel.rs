//! Data-parallel map helpers. With the default `parallel` feature the work is
//! spread over rayon; without it the same calls run sequentially. Results are
//! collected in input order and reduced sequentially by callers, so both paths
//! produce bit-identical output.

#[cfg(feature = "parallel")]
pub fn par_map<T, R, Q>(items: &[T], f: Q) -> Vec<R>
where
    T: Sync,
    R: Send,
    Q: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn par_map<T, R, Q>(items: &[T], f: Q) -> Vec<R>
where
    Q: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

/// Index-driven variant for workloads without a ready-made slice.
#[cfg(feature = "parallel")]
pub fn par_map_indices<R, Q>(n: usize, f: Q) -> Vec<R>
where
    R: Send,
    Q: Fn(usize) -> R + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn par_map_indices<R, Q>(n: usize, f: Q) -> Vec<R>
where
    Q: Fn(usize) -> R,
{
    (0..n).map(f).collect()
}

/// Always-sequential twin of [`par_map`], kept for benchmarking both paths.
pub fn seq_map<T, R, Q>(items: &[T], f: Q) -> Vec<R>
where
    Q: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

/// Always-sequential twin of [`par_map_indices`].
pub fn seq_map_indices<R, Q>(n: usize, f: Q) -> Vec<R>
where
    Q: Fn(usize) -> R,
{
    (0..n).map(f).collect()
}
