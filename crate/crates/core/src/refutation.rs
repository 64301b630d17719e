//! Placebo-treatment refutation.
//!
//! The treatment column is replaced by a random permutation of itself (or by
//! Bernoulli draws at the observed treated fraction) and the estimator is
//! re-run. Permutation `b` draws from a ChaCha8 stream seeded by `seed` with
//! stream id `b`, so results do not depend on evaluation order.

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::CausalDataset;
use crate::estimators::{EstimateError, EstimatorKind};
use crate::stats::{mean, sample_std, two_sided_p};

pub const DEFAULT_PERMUTATIONS: usize = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RefuteError {
    #[error("B must be ≥ 2 (got {0})")]
    TooFewPermutations(usize),
    #[error("treatment column is constant; a placebo permutation would be a no-op")]
    ConstantTreatment,
    #[error("estimator failed on the original data: {0}")]
    Original(EstimateError),
    #[error("estimator failed on placebo permutation {index}: {source}")]
    Placebo { index: usize, source: EstimateError },
}

/// Something that maps a dataset to a scalar effect.
pub trait Estimator {
    fn effect(&self, ds: &CausalDataset) -> Result<f64, EstimateError>;
}

impl Estimator for EstimatorKind {
    fn effect(&self, ds: &CausalDataset) -> Result<f64, EstimateError> {
        self.estimate(ds).map(|e| e.value)
    }
}

impl<F> Estimator for F
where
    F: Fn(&CausalDataset) -> Result<f64, EstimateError>,
{
    fn effect(&self, ds: &CausalDataset) -> Result<f64, EstimateError> {
        self(ds)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlaceboMode {
    /// Shuffle the observed treatment column; the treated count is preserved.
    #[default]
    Permute,
    /// Independent Bernoulli draws at the observed treated fraction.
    Bernoulli,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefutationResult {
    pub original_effect: f64,
    pub placebo_effects: Vec<f64>,
    pub new_effect: f64,
    pub p_value: f64,
    pub seed: u64,
    pub permutations: usize,
}

impl RefutationResult {
    /// Assembles a result from the original and placebo effects: the new
    /// effect is the placebo mean and the p-value a two-sided z-test of that
    /// mean against zero.
    pub fn from_effects(original_effect: f64, placebo_effects: Vec<f64>, seed: u64) -> Self {
        let b = placebo_effects.len();
        let new_effect = mean(&placebo_effects);
        let sd = sample_std(&placebo_effects);
        let p_value = if sd > 0.0 {
            two_sided_p(new_effect / (sd / libm::sqrt(b as f64)))
        } else if new_effect == 0.0 {
            1.0
        } else {
            0.0
        };
        Self { original_effect, placebo_effects, new_effect, p_value, seed, permutations: b }
    }

    /// Four-line report; floats use the shortest round-trip form.
    pub fn render(&self) -> String {
        alloc::format!(
            "Refute: Use a Placebo Treatment\nEstimated Effect: {:?}\nNew Effect: {:?}\np value: {:?}\n",
            self.original_effect,
            self.new_effect,
            self.p_value
        )
    }
}

/// Treatment column of placebo dataset `index`.
pub fn placebo_treatment(treatment: &[bool], mode: PlaceboMode, seed: u64, index: usize) -> Vec<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    match mode {
        PlaceboMode::Permute => {
            let mut t = treatment.to_vec();
            t.shuffle(&mut rng);
            t
        }
        PlaceboMode::Bernoulli => {
            let p = treatment.iter().filter(|&&t| t).count() as f64 / treatment.len() as f64;
            (0..treatment.len()).map(|_| rng.random::<f64>() < p).collect()
        }
    }
}

/// Checks preconditions and returns the original effect.
pub fn prepare<E: Estimator + ?Sized>(ds: &CausalDataset, estimator: &E, permutations: usize) -> Result<f64, RefuteError> {
    if permutations < 2 {
        return Err(RefuteError::TooFewPermutations(permutations));
    }
    let t = ds.treatment();
    if t.iter().all(|&v| v == t[0]) {
        return Err(RefuteError::ConstantTreatment);
    }
    estimator.effect(ds).map_err(RefuteError::Original)
}

/// Effect of the estimator on placebo dataset `index`.
pub fn placebo_effect<E: Estimator + ?Sized>(
    ds: &CausalDataset,
    estimator: &E,
    mode: PlaceboMode,
    seed: u64,
    index: usize,
) -> Result<f64, RefuteError> {
    let placebo = ds
        .with_treatment(placebo_treatment(ds.treatment(), mode, seed, index))
        .map_err(|e| RefuteError::Placebo { index, source: e.into() })?;
    estimator.effect(&placebo).map_err(|source| RefuteError::Placebo { index, source })
}

/// Serial placebo refutation over `permutations` placebo datasets.
pub fn refute_placebo<E: Estimator + ?Sized>(
    ds: &CausalDataset,
    estimator: &E,
    permutations: usize,
    seed: u64,
    mode: PlaceboMode,
) -> Result<RefutationResult, RefuteError> {
    let original = prepare(ds, estimator, permutations)?;
    let effects = (0..permutations)
        .map(|b| placebo_effect(ds, estimator, mode, seed, b))
        .collect::<Result<Vec<f64>, _>>()?;
    Ok(RefutationResult::from_effects(original, effects, seed))
}
