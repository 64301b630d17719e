//! Seeded synthetic datasets with a known treatment effect.

use causa_core::dataset::CausalDataset;
use causa_core::stats::logistic;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// `x ~ N(0, 1)`, `T ~ Bernoulli(1/2)` independent of `x`,
/// `Y = τT + αx + ε` with `ε ~ N(0, 1)`.
pub fn randomized(n: usize, tau: f64, alpha: f64, seed: u64) -> CausalDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::with_capacity(n);
    let mut t = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let xi = normal(&mut rng);
        let ti = rng.random_bool(0.5);
        y.push(tau * f64::from(u8::from(ti)) + alpha * xi + normal(&mut rng));
        x.push(xi);
        t.push(ti);
    }
    CausalDataset::from_arrays(&[("x", x)], t, y).expect("generated arrays are consistent")
}

/// `x ~ N(0, 1)`, `P(T = 1 | x) = logistic(x)`, `Y = τT + 2x + ε`.
pub fn confounded(n: usize, tau: f64, seed: u64) -> CausalDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::with_capacity(n);
    let mut t = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let xi = normal(&mut rng);
        let ti = rng.random_bool(logistic(xi));
        y.push(tau * f64::from(u8::from(ti)) + 2.0 * xi + normal(&mut rng));
        x.push(xi);
        t.push(ti);
    }
    CausalDataset::from_arrays(&[("x", x)], t, y).expect("generated arrays are consistent")
}

/// A randomized dataset whose outcome column has been shuffled, so the true
/// effect is zero.
pub fn null_outcome(n: usize, seed: u64) -> CausalDataset {
    let base = randomized(n, 10.0, 1.0, seed);
    let mut y = base.outcome().expect("outcome is numeric");
    y.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15));
    let x = base.numeric("x").expect("x is numeric");
    CausalDataset::from_arrays(&[("x", x)], base.treatment().to_vec(), y).expect("generated arrays are consistent")
}

/// Treatment fully determined by the sign of `x`: no overlap anywhere.
pub fn separated(n: usize, seed: u64) -> CausalDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 } * (0.5 + rng.random::<f64>())).collect();
    let t: Vec<bool> = x.iter().map(|&v| v > 0.0).collect();
    let y: Vec<f64> = x.iter().zip(&t).map(|(v, &ti)| v + f64::from(u8::from(ti))).collect();
    CausalDataset::from_arrays(&[("x", x)], t, y).expect("generated arrays are consistent")
}
