//! Deterministic data-parallel reductions.
//!
//! Sums are evaluated over a fixed chunking of the index space; chunk
//! partials are combined by a fixed binary tree. Neither the chunking nor
//! the combine order depends on the worker count, so results are
//! bit-identical whether the `parallel` feature is enabled or not, and for
//! any thread-pool size.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Items per chunk of the flattened index space.
pub const SUM_CHUNK: usize = 4096;

/// Pairwise tree fold, associativity fixed by slice length alone.
pub fn tree_fold(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n => {
            let mid = n / 2;
            tree_fold(&xs[..mid]) + tree_fold(&xs[mid..])
        }
    }
}

fn chunk_sum<F: Fn(usize) -> f64>(start: usize, end: usize, f: &F) -> f64 {
    let mut acc = 0.0;
    for i in start..end {
        acc += f(i);
    }
    acc
}

/// `sum_{i < n} f(i)` with deterministic chunked tree reduction.
pub fn sum_indexed<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let n_chunks = n.div_ceil(SUM_CHUNK);
    let partials: Vec<f64> = {
        #[cfg(feature = "parallel")]
        {
            (0..n_chunks)
                .into_par_iter()
                .map(|c| chunk_sum(c * SUM_CHUNK, ((c + 1) * SUM_CHUNK).min(n), &f))
                .collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            (0..n_chunks)
                .map(|c| chunk_sum(c * SUM_CHUNK, ((c + 1) * SUM_CHUNK).min(n), &f))
                .collect()
        }
    };
    tree_fold(&partials)
}

/// Strictly sequential variant of [`sum_indexed`] with the identical
/// chunking and combine order; used by the benches to compare code paths.
pub fn sum_indexed_seq<F: Fn(usize) -> f64>(n: usize, f: F) -> f64 {
    let n_chunks = n.div_ceil(SUM_CHUNK);
    let partials: Vec<f64> = (0..n_chunks)
        .map(|c| chunk_sum(c * SUM_CHUNK, ((c + 1) * SUM_CHUNK).min(n), &f))
        .collect();
    tree_fold(&partials)
}

/// `(0..n).map(f)` preserving index order; parallel when available.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Map fallible; first error (lowest index) wins so failures are
/// deterministic too.
pub fn try_map_indexed<T, E, F>(n: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    let results = map_indexed(n, f);
    let mut out = Vec::with_capacity(n);
    for r in results {
        out.push(r?);
    }
    Ok(out)
}

/// Cap the global worker pool; 0 keeps the library default. Calling more
/// than once is a no-op (the first configuration wins).
#[cfg(feature = "parallel")]
pub fn configure_threads(n: usize) {
    if n > 0 {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

#[cfg(not(feature = "parallel"))]
pub fn configure_threads(_n: usize) {}
