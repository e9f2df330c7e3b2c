//! Data-parallel map with a sequential fallback.
//!
//! Every batch computation in this crate (correlation entries, Monte Carlo
//! chunks, per-letter supertile sums, Hölder pair sweeps) is expressed as an
//! order-preserving map over independent work items and funneled through
//! [`run_map`]. With the `parallel` feature (default) and
//! [`ExecMode::Parallel`] the map runs on the rayon thread pool; in every
//! other configuration it runs sequentially. Results are collected in input
//! order either way, and all floating-point reductions happen after the
//! collect, so the two modes produce bit-identical output.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum ExecMode {
    Sequential,
    /// Use the rayon pool when compiled with the `parallel` feature;
    /// otherwise behaves like `Sequential`.
    #[default]
    Parallel,
}

#[cfg(feature = "parallel")]
pub fn run_map<T, U, F>(mode: ExecMode, items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    use rayon::prelude::*;
    match mode {
        ExecMode::Sequential => items.into_iter().map(f).collect(),
        ExecMode::Parallel => items.into_par_iter().map(f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn run_map<T, U, F>(_mode: ExecMode, items: Vec<T>, f: F) -> Vec<U>
where
    F: Fn(T) -> U,
{
    items.into_iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_and_preserve_order() {
        let items: Vec<u64> = (0..1000).collect();
        let seq = run_map(ExecMode::Sequential, items.clone(), |x| x * x + 1);
        let par = run_map(ExecMode::Parallel, items, |x| x * x + 1);
        assert_eq!(seq, par);
        assert_eq!(seq[10], 101);
    }
}
