//! Execution policy for the Monte Carlo loops.
//!
//! With the `parallel` feature (default) work is spread over the rayon pool;
//! without it every policy runs sequentially. Results never depend on the
//! policy: all randomness is seeded per replication, and reductions happen
//! on index-ordered outputs.

use serde::{Deserialize, Serialize};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExecPolicy {
    Sequential,
    #[default]
    Parallel,
}

impl ExecPolicy {
    /// Whether work will actually be spread across threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == ExecPolicy::Parallel
    }
}

/// `(0..n).map(f).collect()`, possibly in parallel. Output order is index order.
pub fn map_indices<T, F>(policy: ExecPolicy, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if policy.is_parallel() {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = policy;
    (0..n).map(f).collect()
}

/// Maps every element of `items` mutably with a per-worker scratch value.
pub fn map_mut_with<T, S, R, I, F>(policy: ExecPolicy, items: &mut [T], init: I, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, &mut T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if policy.is_parallel() {
        return items.par_iter_mut().map_init(&init, |s, item| f(s, item)).collect();
    }
    let _ = policy;
    let mut scratch = init();
    items.iter_mut().map(|item| f(&mut scratch, item)).collect()
}

/// Like [`map_indices`] with a per-worker scratch value.
pub fn map_indices_with<S, R, I, F>(policy: ExecPolicy, n: usize, init: I, f: F) -> Vec<R>
where
    R: Send,
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if policy.is_parallel() {
        return (0..n).into_par_iter().map_init(&init, |s, i| f(s, i)).collect();
    }
    let _ = policy;
    let mut scratch = init();
    (0..n).map(|i| f(&mut scratch, i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policies_agree() {
        let seq = map_indices(ExecPolicy::Sequential, 1000, |i| (i * i) as u64 % 7);
        let par = map_indices(ExecPolicy::Parallel, 1000, |i| (i * i) as u64 % 7);
        assert_eq!(seq, par);

        let mut a: Vec<u32> = (0..500).collect();
        let mut b = a.clone();
        let ra = map_mut_with(ExecPolicy::Sequential, &mut a, || 3u32, |s, x| {
            *x += *s;
            *x * 2
        });
        let rb = map_mut_with(ExecPolicy::Parallel, &mut b, || 3u32, |s, x| {
            *x += *s;
            *x * 2
        });
        assert_eq!(a, b);
        assert_eq!(ra, rb);
    }
}
