//! Execution-mode switch for the data-parallel inner loops.
//!
//! With the `parallel` feature enabled, [`Exec::Parallel`] runs on the rayon
//! global pool. Without it, both modes run sequentially. Results never depend
//! on the mode.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Exec {
    Sequential,
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

/// Below this many items the parallel paths fall back to a plain loop.
const MIN_PARALLEL: u64 = 2048;

/// Smallest index in `0..n` satisfying `pred`.
pub fn find_first(exec: Exec, n: u64, pred: impl Fn(u64) -> bool + Sync + Send) -> Option<u64> {
    #[cfg(feature = "parallel")]
    if exec == Exec::Parallel && n >= MIN_PARALLEL {
        return (0..n).into_par_iter().find_first(|&i| pred(i));
    }
    let _ = exec;
    (0..n).find(|&i| pred(i))
}

pub fn any(exec: Exec, n: u64, pred: impl Fn(u64) -> bool + Sync + Send) -> bool {
    #[cfg(feature = "parallel")]
    if exec == Exec::Parallel && n >= MIN_PARALLEL {
        return (0..n).into_par_iter().any(pred);
    }
    let _ = exec;
    (0..n).any(pred)
}

/// Order-preserving map.
pub fn map<T, R>(exec: Exec, items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R>
where
    T: Sync,
    R: Send,
{
    #[cfg(feature = "parallel")]
    if exec == Exec::Parallel && items.len() > 1 {
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        for exec in [Exec::Sequential, Exec::Parallel] {
            assert_eq!(find_first(exec, 100_000, |i| i * i > 5_000_000), Some(2237));
            assert!(!any(exec, 10_000, |i| i > 10_000));
            assert_eq!(map(exec, &[1, 2, 3], |x| x * 2), vec![2, 4, 6]);
        }
    }
}
