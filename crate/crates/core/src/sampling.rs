//! Seeded random generators shared by the harness, the simulators and the
//! test suites.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::dist::DiscreteDistribution;

pub type SeededRng = ChaCha8Rng;

/// One step of the splitmix64 sequence.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for sub-stream `index` of `seed`, independent of evaluation order.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index.wrapping_add(0x5851_f42d_4c95_7f2d)))
}

pub fn rng_for(seed: u64, index: u64) -> SeededRng {
    SeededRng::seed_from_u64(derive_seed(seed, index))
}

/// How support values are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueStyle {
    /// Small integers, so ties are frequent.
    Integer,
    /// Gaussian values at a random scale between 0.1 and 30.
    Continuous,
    /// Right-skewed log-normal values.
    Skewed,
}

impl ValueStyle {
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        match rng.gen_range(0..3) {
            0 => Self::Integer,
            1 => Self::Continuous,
            _ => Self::Skewed,
        }
    }
}

/// Draws `m` values in the given style.
pub fn random_values<R: Rng + ?Sized>(rng: &mut R, m: usize, style: ValueStyle) -> Vec<f64> {
    match style {
        ValueStyle::Integer => {
            let span = rng.gen_range(1..=6);
            (0..m).map(|_| rng.gen_range(-span..=span) as f64).collect()
        }
        ValueStyle::Continuous => {
            let scale = 10f64.powf(rng.gen_range(-1.0..1.5));
            let shift = rng.gen_range(-2.0..2.0) * scale;
            (0..m)
                .map(|_| shift + scale * rng.sample::<f64, _>(StandardNormal))
                .collect()
        }
        ValueStyle::Skewed => {
            let scale = 10f64.powf(rng.gen_range(-1.0..1.0));
            (0..m)
                .map(|_| scale * (0.8 * rng.sample::<f64, _>(StandardNormal)).exp())
                .collect()
        }
    }
}

/// Positive weights summing to one, equal with probability one half.
pub fn random_weights<R: Rng + ?Sized>(rng: &mut R, m: usize) -> Vec<f64> {
    if rng.gen_bool(0.5) {
        return vec![1.0 / m as f64; m];
    }
    let raw: Vec<f64> = (0..m).map(|_| 0.05 + Distribution::<f64>::sample(&Exp1, rng)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// A random distribution with at most `max_support` atoms on `[lo, hi]`.
///
/// Half the draws use an integer lattice (ties, coalescing), the rest
/// continuous values; weights are equal or random.
pub fn random_distribution<R: Rng + ?Sized>(
    rng: &mut R,
    max_support: usize,
    lo: f64,
    hi: f64,
) -> DiscreteDistribution {
    let m = rng.gen_range(1..=max_support.max(1));
    let values: Vec<f64> = if rng.gen_bool(0.5) {
        let step = ((hi - lo) / rng.gen_range(2..=40) as f64).max(f64::MIN_POSITIVE);
        let slots = ((hi - lo) / step).floor() as i64;
        (0..m)
            .map(|_| lo + step * rng.gen_range(0..=slots) as f64)
            .collect()
    } else {
        (0..m).map(|_| rng.gen_range(lo..=hi)).collect()
    };
    let weights = random_weights(rng, m);
    DiscreteDistribution::from_weighted(&values, &weights).expect("weights sum to one")
}

/// Uniform random permutation of `0..m`.
pub fn permutation<R: Rng + ?Sized>(rng: &mut R, m: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..m).collect();
    idx.shuffle(rng);
    idx
}

/// A random increasing 1-Lipschitz `g` with `g(0) = 0`, as knots of a
/// piecewise-linear function with slopes in `[0, 1]` and constant beyond the
/// last knot.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    knots: Vec<f64>,
    slopes: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn new(knots: Vec<f64>, slopes: Vec<f64>) -> Self {
        assert_eq!(knots.len(), slopes.len());
        assert!(knots.windows(2).all(|w| w[0] < w[1]));
        Self { knots, slopes }
    }

    pub fn random_lipschitz<R: Rng + ?Sized>(rng: &mut R, range: f64) -> Self {
        let pieces = rng.gen_range(1..=6);
        let mut knots: Vec<f64> = (0..pieces - 1).map(|_| rng.gen_range(0.0..range)).collect();
        knots.push(0.0);
        knots.sort_by(f64::total_cmp);
        knots.dedup();
        let slopes = knots.iter().map(|_| rng.gen_range(0.0..=1.0)).collect();
        Self { knots, slopes }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for (k, (&start, &slope)) in self.knots.iter().zip(&self.slopes).enumerate() {
            let end = self.knots.get(k + 1).copied().unwrap_or(f64::INFINITY);
            if x <= start {
                break;
            }
            acc += slope * (x.min(end) - start);
        }
        acc
    }
}
