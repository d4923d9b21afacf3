//! Randomized search for violations of risk-measure axioms.
//!
//! Each trial draws a scenario-level instance from its own derived seed, so
//! the first violating trial (and hence the report) does not depend on how
//! trials are scheduled across threads. A violation is shrunk by halving its
//! perturbation for as long as it stays a violation, at most 20 times.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::functional::Functional;
use crate::concentration::{block_size, couple, CoupleStyle, ScenarioSet};
use crate::dist::DiscreteDistribution;
use crate::error::{check_level, Error, Result};
use crate::sampling::{permutation, random_values, rng_for, SeededRng, ValueStyle};

/// Relative slack before a comparison counts as violated.
pub const HARNESS_TOL: f64 = 1e-9;

const SHRINK_STEPS: usize = 20;

/// Axioms the harness can search against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Axiom {
    /// `X <= Y` implies `ρ(X) <= ρ(Y)`.
    #[serde(rename = "M")]
    Monotonicity,
    /// `ρ(X + c) = ρ(X) + c`.
    #[serde(rename = "TI")]
    TranslationInvariance,
    /// `ρ(λX) = λρ(X)` for `λ > 0`.
    #[serde(rename = "PH")]
    PositiveHomogeneity,
    /// `ρ(λX + (1 − λ)Y) <= λρ(X) + (1 − λ)ρ(Y)`.
    Convexity,
    /// A mean-preserving spread is never less risky.
    #[serde(rename = "SSD")]
    Ssd,
    /// A `p`-concentrated rearrangement of the same marginals is never less
    /// risky.
    #[serde(rename = "pCA")]
    ConcentrationAversion { p: f64 },
}

impl Axiom {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Monotonicity => "M",
            Self::TranslationInvariance => "TI",
            Self::PositiveHomogeneity => "PH",
            Self::Convexity => "Convexity",
            Self::Ssd => "SSD",
            Self::ConcentrationAversion { .. } => "pCA",
        }
    }

    /// Parses `M`, `TI`, `PH`, `Convexity`, `SSD` or `pCA` (with level `p`).
    pub fn parse(name: &str, p: f64) -> Result<Self> {
        Ok(match name.to_ascii_lowercase().as_str() {
            "m" => Self::Monotonicity,
            "ti" => Self::TranslationInvariance,
            "ph" => Self::PositiveHomogeneity,
            "convexity" => Self::Convexity,
            "ssd" => Self::Ssd,
            "pca" => {
                check_level(p)?;
                Self::ConcentrationAversion { p }
            }
            _ => return Err(Error::Functional(format!("unknown axiom `{name}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HarnessResult {
    Pass,
    Counterexample,
}

/// A concrete violating instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Counterexample {
    pub trial: usize,
    /// The comparison that failed, e.g. `rho(X) <= rho(Y)`.
    pub relation: String,
    /// Scenario CSV of the instance.
    pub scenarios: String,
    pub lhs: f64,
    pub rhs: f64,
    pub shrink_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarnessReport {
    pub axiom: Axiom,
    pub result: HarnessResult,
    pub trials: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Counterexample>,
}

impl HarnessReport {
    pub fn passed(&self) -> bool {
        self.result == HarnessResult::Pass
    }
}

/// `a <= b` up to relative slack, with infinities compared exactly.
pub fn approx_le(a: f64, b: f64) -> bool {
    if a.is_nan() || b.is_nan() {
        return false;
    }
    if a <= b {
        return true;
    }
    if a.is_infinite() || b.is_infinite() {
        return false;
    }
    a - b <= HARNESS_TOL * a.abs().max(b.abs()).max(1.0)
}

/// `a = b` up to relative slack, with infinities compared exactly.
pub fn approx_eq(a: f64, b: f64) -> bool {
    approx_le(a, b) && approx_le(b, a)
}

/// Searches `trials` random instances for a violation of `axiom` by `rho`.
///
/// A found violation is a successful report, not an error.
pub fn axiom_harness<F: Functional + ?Sized>(
    rho: &F,
    axiom: Axiom,
    trials: usize,
    seed: u64,
) -> Result<HarnessReport> {
    if trials == 0 {
        return Err(Error::Functional("trials must be at least 1".into()));
    }
    if let Axiom::ConcentrationAversion { p } = axiom {
        check_level(p)?;
        grid_period(p)?;
    }
    let hit = (0..trials).into_par_iter().find_first(|&t| {
        let inst = Instance::draw(axiom, &mut rng_for(seed, t as u64));
        inst.check(rho).is_some()
    });
    let counterexample = hit.map(|t| {
        let mut inst = Instance::draw(axiom, &mut rng_for(seed, t as u64));
        let mut steps = 0;
        while steps < SHRINK_STEPS {
            let smaller = inst.shrink();
            if smaller.check(rho).is_none() {
                break;
            }
            inst = smaller;
            steps += 1;
        }
        let (lhs, rhs) = inst.check(rho).expect("kept only violating instances");
        Counterexample {
            trial: t,
            relation: inst.relation().into(),
            scenarios: inst.csv(),
            lhs,
            rhs,
            shrink_steps: steps,
        }
    });
    Ok(HarnessReport {
        axiom,
        result: if counterexample.is_some() {
            HarnessResult::Counterexample
        } else {
            HarnessResult::Pass
        },
        trials,
        counterexample,
    })
}

/// Smallest `q <= 1000` with `q·p` integral.
fn grid_period(p: f64) -> Result<usize> {
    (1..=1000)
        .find(|&q| block_size(q, p).is_ok())
        .ok_or_else(|| Error::Grid(format!("level {p} has no scenario grid up to 1000 points")))
}

// Scenario-level instance of one axiom. `x` and `y` share scenario weights
// `w`; `aux` is the scalar perturbation (shift, scale, mixing weight).
#[derive(Debug, Clone)]
struct Instance {
    axiom: Axiom,
    x: Vec<f64>,
    y: Vec<f64>,
    w: Vec<f64>,
    aux: f64,
}

impl Instance {
    fn draw(axiom: Axiom, rng: &mut SeededRng) -> Self {
        let style = ValueStyle::random(rng);
        if let Axiom::ConcentrationAversion { p } = axiom {
            return Self::draw_pca(p, style, rng);
        }
        let m = rng.gen_range(2..=16);
        let x = random_values(rng, m, style);
        let w = crate::sampling::random_weights(rng, m);
        let scale = spread(&x).max(1e-3);
        let (y, aux) = match axiom {
            Axiom::Monotonicity => (bump(rng, &x, scale), 0.0),
            Axiom::TranslationInvariance => (x.clone(), rng.gen_range(-2.0..2.0) * scale),
            Axiom::PositiveHomogeneity => (x.clone(), 10f64.powf(rng.gen_range(-1.0..1.0))),
            Axiom::Convexity => {
                let y = if rng.gen_bool(0.5) {
                    // Affine partner: same ranks, different spread.
                    let a = 10f64.powf(rng.gen_range(-1.0..1.0));
                    let b = rng.gen_range(-1.0..1.0) * scale;
                    x.iter().map(|v| a * v + b).collect()
                } else {
                    let other = ValueStyle::random(rng);
                    random_values(rng, m, other)
                };
                (y, rng.gen_range(0.05..0.95))
            }
            Axiom::Ssd => {
                let e = (0..m).map(|_| rng.gen_range(0.0..1.0) * scale).collect();
                (e, 0.0)
            }
            Axiom::ConcentrationAversion { .. } => unreachable!(),
        };
        Self { axiom, x, y, w, aux }
    }

    // `x` and `y` hold the sorted marginals on a grid compatible with `p`;
    // `aux` seeds the random pairing and the concentrated style.
    fn draw_pca(p: f64, style: ValueStyle, rng: &mut SeededRng) -> Self {
        let q = grid_period(p).expect("checked before drawing");
        let reps = (16usize.div_ceil(q)).max(1);
        let m = q * rng.gen_range(reps..=reps + 2);
        let mut x = random_values(rng, m, style);
        let other = ValueStyle::random(rng);
        let mut y = random_values(rng, m, other);
        x.sort_by(f64::total_cmp);
        y.sort_by(f64::total_cmp);
        Self {
            axiom: Axiom::ConcentrationAversion { p },
            x,
            y,
            w: vec![1.0 / m as f64; m],
            aux: rng.gen::<u32>() as f64,
        }
    }

    fn law(&self, v: &[f64]) -> DiscreteDistribution {
        DiscreteDistribution::from_weighted(v, &self.w).expect("valid weights")
    }

    // The two scenario vectors whose risks are compared, plus the
    // right-hand-side adjustment for the equality axioms.
    fn sides<F: Functional + ?Sized>(&self, rho: &F) -> (f64, f64) {
        match self.axiom {
            Axiom::Monotonicity => (rho.value(&self.law(&self.x)), rho.value(&self.law(&self.y))),
            Axiom::TranslationInvariance => {
                let shifted: Vec<f64> = self.x.iter().map(|v| v + self.aux).collect();
                (rho.value(&self.law(&shifted)), rho.value(&self.law(&self.x)) + self.aux)
            }
            Axiom::PositiveHomogeneity => {
                let scaled: Vec<f64> = self.x.iter().map(|v| v * self.aux).collect();
                (rho.value(&self.law(&scaled)), self.aux * rho.value(&self.law(&self.x)))
            }
            Axiom::Convexity => {
                let l = self.aux;
                let mixed: Vec<f64> = self
                    .x
                    .iter()
                    .zip(&self.y)
                    .map(|(a, b)| l * a + (1.0 - l) * b)
                    .collect();
                let rx = rho.value(&self.law(&self.x));
                let ry = rho.value(&self.law(&self.y));
                let rhs = if rx.is_infinite() || ry.is_infinite() {
                    f64::INFINITY
                } else {
                    l * rx + (1.0 - l) * ry
                };
                (rho.value(&self.law(&mixed)), rhs)
            }
            Axiom::Ssd => {
                let (narrow, wide) = self.spread_pair();
                (rho.value(&narrow), rho.value(&wide))
            }
            Axiom::ConcentrationAversion { .. } => {
                let (free, concentrated) = self.pca_pair();
                (rho.value(&free.law(&free.total())), rho.value(&concentrated.law(&concentrated.total())))
            }
        }
    }

    // Some((lhs, rhs)) when the instance violates the axiom.
    fn check<F: Functional + ?Sized>(&self, rho: &F) -> Option<(f64, f64)> {
        let (lhs, rhs) = self.sides(rho);
        let ok = match self.axiom {
            Axiom::TranslationInvariance | Axiom::PositiveHomogeneity => approx_eq(lhs, rhs),
            _ => approx_le(lhs, rhs),
        };
        (!ok).then_some((lhs, rhs))
    }

    // Each scenario split into `x ± e` at half weight.
    fn spread_pair(&self) -> (DiscreteDistribution, DiscreteDistribution) {
        let wide = self
            .x
            .iter()
            .zip(&self.y)
            .zip(&self.w)
            .flat_map(|((&x, &e), &w)| [(x - e, 0.5 * w), (x + e, 0.5 * w)]);
        (
            self.law(&self.x),
            DiscreteDistribution::new(wide).expect("valid weights"),
        )
    }

    fn pca_pair(&self) -> (ScenarioSet, ScenarioSet) {
        let Axiom::ConcentrationAversion { p } = self.axiom else {
            unreachable!()
        };
        let m = self.x.len();
        let seed = self.aux as u64;
        let mut rng = rng_for(seed, 1);
        let perm = permutation(&mut rng, m);
        let rows = (0..m).map(|j| vec![self.x[j], self.y[perm[j]]]).collect();
        let free = ScenarioSet::equiprobable(rows).expect("valid scenarios");
        let style = match seed % 3 {
            0 => CoupleStyle::Comonotone,
            1 => CoupleStyle::TailBlockAntitone,
            _ => CoupleStyle::TailBlockShuffle { seed },
        };
        let concentrated = couple(&self.law(&self.x), &self.law(&self.y), p, style, m)
            .expect("grid-aligned scenario count");
        (free, concentrated)
    }

    fn shrink(&self) -> Self {
        let mut out = self.clone();
        match self.axiom {
            Axiom::Monotonicity => {
                out.y = self.x.iter().zip(&self.y).map(|(a, b)| a + 0.5 * (b - a)).collect();
            }
            Axiom::TranslationInvariance => out.aux = 0.5 * self.aux,
            Axiom::PositiveHomogeneity => out.aux = 1.0 + 0.5 * (self.aux - 1.0),
            Axiom::Convexity => {
                out.y = self.x.iter().zip(&self.y).map(|(a, b)| a + 0.5 * (b - a)).collect();
            }
            Axiom::Ssd => out.y = self.y.iter().map(|e| 0.5 * e).collect(),
            Axiom::ConcentrationAversion { .. } => {
                // Pull the second marginal halfway to its mean; order is kept.
                let mu = self.y.iter().sum::<f64>() / self.y.len() as f64;
                out.y = self.y.iter().map(|v| mu + 0.5 * (v - mu)).collect();
            }
        }
        out
    }

    fn relation(&self) -> &'static str {
        match self.axiom {
            Axiom::Monotonicity => "rho(x) <= rho(y) with x <= y",
            Axiom::TranslationInvariance => "rho(x + c) = rho(x) + c",
            Axiom::PositiveHomogeneity => "rho(l*x) = l*rho(x)",
            Axiom::Convexity => "rho(l*x + (1-l)*y) <= l*rho(x) + (1-l)*rho(y)",
            Axiom::Ssd => "rho(x) <= rho(x +/- e)",
            Axiom::ConcentrationAversion { .. } => "rho(x + y) <= rho(x' + y') with (x', y') concentrated",
        }
    }

    fn csv(&self) -> String {
        use crate::fmt::g12;
        let mut out = String::new();
        let mut line = |cells: &[f64]| {
            let row: Vec<String> = cells.iter().map(|&v| g12(v)).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        };
        match self.axiom {
            Axiom::Monotonicity => {
                for ((a, b), w) in self.x.iter().zip(&self.y).zip(&self.w) {
                    line(&[*a, *b, *w]);
                }
                format!("x,y,weight\n{out}")
            }
            Axiom::TranslationInvariance | Axiom::PositiveHomogeneity => {
                for (a, w) in self.x.iter().zip(&self.w) {
                    line(&[*a, *w]);
                }
                let name = if self.axiom == Axiom::TranslationInvariance { "c" } else { "l" };
                format!("# {name} = {}\nx,weight\n{out}", g12(self.aux))
            }
            Axiom::Convexity => {
                for ((a, b), w) in self.x.iter().zip(&self.y).zip(&self.w) {
                    line(&[*a, *b, *w]);
                }
                format!("# l = {}\nx,y,weight\n{out}", g12(self.aux))
            }
            Axiom::Ssd => {
                for ((a, e), w) in self.x.iter().zip(&self.y).zip(&self.w) {
                    line(&[*a, *e, *w]);
                }
                format!("x,e,weight\n{out}")
            }
            Axiom::ConcentrationAversion { .. } => {
                let (free, conc) = self.pca_pair();
                for (r, c) in free.losses().iter().zip(conc.losses()) {
                    line(&[r[0], r[1], c[0], c[1], 1.0 / self.x.len() as f64]);
                }
                format!("x,y,x_conc,y_conc,weight\n{out}")
            }
        }
    }
}

fn spread(x: &[f64]) -> f64 {
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (hi - lo).max(x.iter().map(|v| v.abs()).fold(0.0, f64::max) * 0.1)
}

// `y >= x` scenario-wise: a bump on everything, on a random subset, on the
// lower half, or on a single scenario.
fn bump(rng: &mut SeededRng, x: &[f64], scale: f64) -> Vec<f64> {
    let m = x.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mask: Vec<bool> = match rng.gen_range(0..4) {
        0 => vec![true; m],
        1 => (0..m).map(|_| rng.gen_bool(0.5)).collect(),
        2 => {
            let cut = rng.gen_range(1..=m);
            let mut mk = vec![false; m];
            order[..cut].iter().for_each(|&s| mk[s] = true);
            mk
        }
        _ => {
            let mut mk = vec![false; m];
            mk[rng.gen_range(0..m)] = true;
            mk
        }
    };
    let uniform_size = rng.gen_bool(0.5);
    let size = rng.gen_range(0.0..1.0) * scale;
    x.iter()
        .zip(&mask)
        .map(|(&v, &hit)| {
            if !hit {
                v
            } else if uniform_size {
                v + size
            } else {
                v + rng.gen_range(0.0..1.0) * scale
            }
        })
        .collect()
}
