//! Placebo refutation spread over a thread pool.
//!
//! Placebo `b` always draws from stream `b` of the seeded generator and the
//! results are collected in index order, so the outcome is the same as the
//! serial loop bit for bit.

use causa_core::dataset::CausalDataset;
use causa_core::refutation::{placebo_effect, prepare, Estimator, PlaceboMode, RefutationResult, RefuteError};
use rayon::prelude::*;

pub fn refute_placebo_parallel<E: Estimator + Sync + ?Sized>(
    ds: &CausalDataset,
    estimator: &E,
    permutations: usize,
    seed: u64,
    mode: PlaceboMode,
) -> Result<RefutationResult, RefuteError> {
    let original = prepare(ds, estimator, permutations)?;
    let effects = (0..permutations)
        .into_par_iter()
        .map(|b| placebo_effect(ds, estimator, mode, seed, b))
        .collect::<Result<Vec<f64>, _>>()?;
    Ok(RefutationResult::from_effects(original, effects, seed))
}
