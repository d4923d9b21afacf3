//! Deterministic inputs for the benchmarks.

use concentra::sampling::{random_distribution, rng_for, SeededRng};
use concentra::{CheckerboardCopula, DiscreteDistribution, ScenarioSet};
use rand::Rng;

pub fn rng(seed: u64) -> SeededRng {
    rng_for(seed, 0)
}

/// A distribution with `atoms` support points on `[-100, 100]`.
pub fn distribution(atoms: usize, seed: u64) -> DiscreteDistribution {
    let mut r = rng(seed);
    let values: Vec<f64> = (0..atoms).map(|_| r.gen_range(-100.0..100.0)).collect();
    DiscreteDistribution::uniform(&values).expect("finite values")
}

pub fn small_distribution(seed: u64) -> DiscreteDistribution {
    random_distribution(&mut rng(seed), 50, -100.0, 100.0)
}

/// Equi-probable scenarios with `k` correlated loss columns.
pub fn scenarios(m: usize, k: usize, seed: u64) -> ScenarioSet {
    let mut r = rng(seed);
    let rows = (0..m)
        .map(|_| {
            let common: f64 = r.gen_range(-0.03..0.03);
            (0..k).map(|_| common + r.gen_range(-0.05..0.05)).collect()
        })
        .collect();
    ScenarioSet::equiprobable(rows).expect("non-empty rows")
}

pub fn copula(n: usize, seed: u64) -> CheckerboardCopula {
    CheckerboardCopula::random(&mut rng(seed), n)
}
