//! Independent runs in bulk: seed sweeps, scenario batches, property
//! batches. With the `parallel` feature (on by default) work is spread over
//! the rayon pool; without it everything runs on the calling thread. Each
//! run stays single-threaded either way, so results are identical.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::engine::{run, Scenario, Trace};
use crate::error::Result;

/// Maps `f` over `items`, in parallel when the feature is enabled. Output
/// order matches input order.
#[cfg(feature = "parallel")]
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.par_iter().map(f).collect()
}

/// Sequential fallback.
#[cfg(not(feature = "parallel"))]
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    map_sequential(items, f)
}

pub fn map_sequential<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

pub fn run_many(scenarios: &[Scenario]) -> Vec<Result<Trace>> {
    map(scenarios, run)
}

pub fn run_many_sequential(scenarios: &[Scenario]) -> Vec<Result<Trace>> {
    map_sequential(scenarios, run)
}

/// Copies of `base` that differ only in seed.
pub fn with_seeds<I: IntoIterator<Item = u64>>(base: &Scenario, seeds: I) -> Vec<Scenario> {
    seeds
        .into_iter()
        .map(|seed| Scenario {
            seed,
            ..base.clone()
        })
        .collect()
}

pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
