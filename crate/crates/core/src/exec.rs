//! Fan-out helpers. With the `parallel` feature disabled every mode runs
//! sequentially.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How independent work items (seeds, sweep points, designs) are executed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Parallelism {
    Sequential,
    #[default]
    Parallel,
}

impl Parallelism {
    /// Whether work will actually run on the rayon pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Parallelism::Parallel
    }
}

/// Order-preserving map over a slice.
pub fn map<T, R, F>(items: &[T], mode: Parallelism, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        return items.par_iter().map(f).collect();
    }
    let _ = mode;
    items.iter().map(f).collect()
}

/// Folds `0..count` with per-worker state and merges partial results with
/// `merge`, which must be associative and commutative.
pub fn fold_range<S, A, I, F, M>(count: u64, mode: Parallelism, init: I, fold: F, merge: M, empty: A) -> A
where
    S: Send,
    A: Send + Sync + Clone,
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, A, u64) -> A + Sync + Send,
    M: Fn(A, A) -> A + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        return (0..count)
            .into_par_iter()
            .fold(
                || (init(), empty.clone()),
                |(mut s, acc), i| {
                    let acc = fold(&mut s, acc, i);
                    (s, acc)
                },
            )
            .map(|(_, acc)| acc)
            .reduce(|| empty.clone(), &merge);
    }
    let _ = (mode, &merge);
    let mut state = init();
    (0..count).fold(empty, |acc, i| fold(&mut state, acc, i))
}
