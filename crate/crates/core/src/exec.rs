//! Data-parallel kernels with a sequential fallback.
//!
//! With the `parallel` feature (default) [`Execution::Parallel`] runs on the
//! rayon pool; without it every request degrades to the sequential path.
//! Floating reductions always go through fixed-size blocks summed in index
//! order, so results are bit-identical across modes and thread counts.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Block size of deterministic reductions.
pub const REDUCTION_BLOCK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

impl Execution {
    /// Whether this request will actually run on the thread pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// `(0..n).map(f).collect()`.
pub fn map_range<T, F>(exec: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Calls `f(i, chunk)` for each `chunk_len`-sized chunk of `data`.
pub fn for_each_chunk_mut<T, F>(exec: Execution, data: &mut [T], chunk_len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        data.par_chunks_mut(chunk_len)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
        return;
    }
    let _ = exec;
    data.chunks_mut(chunk_len)
        .enumerate()
        .for_each(|(i, c)| f(i, c));
}

/// Applies `f` to every item of `items`.
pub fn map_slice<S, T, F>(exec: Execution, items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Sum of `f(i)` over `0..n` with a fixed summation order: block partials in
/// index order, then the partials in block order.
pub fn ordered_sum<T, F>(exec: Execution, n: usize, f: F) -> T
where
    T: Send + Clone + std::ops::Add<Output = T> + num_traits::Zero,
    F: Fn(usize) -> T + Sync + Send,
{
    let blocks = n.div_ceil(REDUCTION_BLOCK);
    let partials = map_range(exec, blocks, |b| {
        let lo = b * REDUCTION_BLOCK;
        let hi = (lo + REDUCTION_BLOCK).min(n);
        (lo..hi).fold(T::zero(), |acc, i| acc + f(i))
    });
    partials.into_iter().fold(T::zero(), |acc, p| acc + p)
}

/// Maximum of `f(i)` over `0..n` (`None` when `n == 0`).
pub fn ordered_max<F>(exec: Execution, n: usize, f: F) -> Option<f64>
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let blocks = n.div_ceil(REDUCTION_BLOCK);
    let partials = map_range(exec, blocks, |b| {
        let lo = b * REDUCTION_BLOCK;
        let hi = (lo + REDUCTION_BLOCK).min(n);
        (lo..hi).map(&f).fold(f64::NEG_INFINITY, f64::max)
    });
    partials.into_iter().reduce(f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_bitwise() {
        let f = |i: usize| 1.0 / (1.0 + i as f64).powi(2);
        let a: f64 = ordered_sum(Execution::Sequential, 100_000, f);
        let b: f64 = ordered_sum(Execution::Parallel, 100_000, f);
        assert_eq!(a.to_bits(), b.to_bits());
        assert_eq!(
            ordered_max(Execution::Parallel, 10, |i| i as f64),
            Some(9.0)
        );
        assert_eq!(ordered_max(Execution::Sequential, 0, |i| i as f64), None);
    }

    #[test]
    fn chunked_writes() {
        let mut v = vec![0usize; 12];
        for_each_chunk_mut(Execution::Parallel, &mut v, 3, |i, c| c.fill(i));
        assert_eq!(v, [0, 0, 0, 1, 1, 1, 2, 2, 2, 3, 3, 3]);
    }
}
