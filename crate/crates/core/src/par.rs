//! Execution policy for data-parallel loops.
//!
//! Every parallel entry point in this crate takes an [`Execution`] and produces
//! results in index order, so the sequential and parallel paths are
//! bit-identical. Without the `parallel` feature, [`Execution::Parallel`]
//! silently runs sequentially.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How a data-parallel loop is executed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Uses the current rayon pool (the global one unless called inside
    /// `ThreadPool::install`).
    #[default]
    Parallel,
}

impl Execution {
    /// True when this policy will actually fan out to worker threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Maps `f` over `0..n`, returning outputs in index order.
pub fn map_indexed<T, F>(exec: Execution, n: usize, f: F) -> Vec<T>
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

/// Maps `f` over a slice, returning outputs in input order.
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

/// Applies `f(row_index, row)` to every `row_len`-sized chunk of `data`.
pub fn for_each_row<T, F>(exec: Execution, data: &mut [T], row_len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    assert!(row_len > 0, "row length must be positive");
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        data.par_chunks_mut(row_len)
            .enumerate()
            .for_each(|(i, row)| f(i, row));
        return;
    }
    let _ = exec;
    data.chunks_mut(row_len)
        .enumerate()
        .for_each(|(i, row)| f(i, row));
}

/// Number of worker threads the parallel path would use right now.
pub fn current_threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policies_agree() {
        let f = |i: usize| (i as f64).sqrt().sin();
        let a = map_indexed(Execution::Sequential, 1000, f);
        let b = map_indexed(Execution::Parallel, 1000, f);
        assert_eq!(a, b);
    }

    #[test]
    fn rows_are_visited_once() {
        let mut data = vec![0usize; 12];
        for_each_row(Execution::Parallel, &mut data, 4, |i, row| {
            for v in row.iter_mut() {
                *v += i + 1;
            }
        });
        assert_eq!(data, vec![1, 1, 1, 1, 2, 2, 2, 2, 3, 3, 3, 3]);
    }
}
