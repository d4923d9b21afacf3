//! Checkerboard copulas and the Markov-chain law-of-large-numbers diagnostic.
//!
//! A checkerboard copula on an `n × n` grid spreads each cell's mass
//! uniformly over the cell. Rows index the first coordinate `u`, columns the
//! second coordinate `v`; every row and every column carries mass `1/n`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::DiscreteDistribution;
use crate::error::{check_level, Error, Result};
use crate::sampling::{rng_for, SeededRng};

/// Tolerance on row and column sums of a constructed copula.
pub const MARGIN_TOL: f64 = 1e-12;

/// Inputs whose margins are off by at most this much are rebalanced.
pub const BALANCE_TOL: f64 = 1e-9;

/// Tolerance of the `C(p, p) = p` check.
pub const DP_TOL: f64 = 1e-12;

/// Cells lighter than this count as empty.
pub const MASS_EPS: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCopula", into = "RawCopula")]
pub struct CheckerboardCopula {
    n: usize,
    /// Row-major; `mass[i * n + j]` is the mass of row `i`, column `j`.
    mass: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawCopula {
    n: usize,
    mass: Vec<f64>,
}

impl TryFrom<RawCopula> for CheckerboardCopula {
    type Error = Error;

    fn try_from(raw: RawCopula) -> Result<Self> {
        Self::new(raw.n, raw.mass)
    }
}

impl From<CheckerboardCopula> for RawCopula {
    fn from(c: CheckerboardCopula) -> Self {
        Self {
            n: c.n,
            mass: c.mass,
        }
    }
}

impl CheckerboardCopula {
    /// Validates a row-major mass grid. Margins within [`BALANCE_TOL`] of
    /// `1/n` are rebalanced; larger deviations are rejected.
    pub fn new(n: usize, mass: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Copula("grid size must be positive".into()));
        }
        if mass.len() != n * n {
            return Err(Error::Dimension {
                expected: n * n,
                got: mass.len(),
                context: "copula cells",
            });
        }
        if let Some(v) = mass.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Copula(format!("cell mass {v} is not a nonnegative number")));
        }
        let c = Self { n, mass };
        let dev = c.margin_error();
        if dev > BALANCE_TOL {
            return Err(Error::Copula(format!(
                "row or column sum is off 1/{n} by {dev}"
            )));
        }
        Ok(if dev > MARGIN_TOL { c.balanced() } else { c })
    }

    /// Rescales a nonnegative matrix to uniform margins by alternating row
    /// and column normalization. The matrix must admit such a scaling (for
    /// example, strictly positive entries).
    pub fn from_raw_balanced(n: usize, raw: Vec<f64>) -> Result<Self> {
        if raw.len() != n * n || raw.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Copula("raw grid must hold n² nonnegative numbers".into()));
        }
        let total: f64 = raw.iter().sum();
        if total <= 0.0 {
            return Err(Error::Copula("raw grid has no mass".into()));
        }
        let c = Self {
            n,
            mass: raw.into_iter().map(|v| v / total).collect(),
        }
        .balanced();
        if c.margin_error() > MARGIN_TOL {
            return Err(Error::Copula("grid cannot be scaled to uniform margins".into()));
        }
        Ok(c)
    }

    /// `C(u, v) = uv`.
    pub fn independence(n: usize) -> Self {
        let w = 1.0 / (n * n) as f64;
        Self {
            n,
            mass: vec![w; n * n],
        }
    }

    /// Mass `1/n` on the diagonal cells; equals `min(u, v)` at grid corners.
    pub fn comonotone(n: usize) -> Self {
        Self::from_permutation(&(0..n).collect::<Vec<_>>())
    }

    /// Mass `1/n` on the anti-diagonal cells.
    pub fn countermonotone(n: usize) -> Self {
        Self::from_permutation(&(0..n).rev().collect::<Vec<_>>())
    }

    /// Mass `1/n` in cell `(i, perm[i])`.
    pub fn from_permutation(perm: &[usize]) -> Self {
        let n = perm.len();
        let mut mass = vec![0.0; n * n];
        for (i, &j) in perm.iter().enumerate() {
            mass[i * n + j] = 1.0 / n as f64;
        }
        Self { n, mass }
    }

    /// Uniform mass on `[0, k/n]²` and on `[k/n, 1]²`, none elsewhere.
    pub fn block_diagonal(n: usize, k: usize) -> Result<Self> {
        if k == 0 || k >= n {
            return Err(Error::Grid(format!("block split {k} must lie in 1..{n}")));
        }
        let mut mass = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let (a, b) = (i < k, j < k);
                if a == b {
                    let size = if a { k } else { n - k };
                    mass[i * n + j] = 1.0 / (n * size) as f64;
                }
            }
        }
        Ok(Self { n, mass })
    }

    /// Random copula: a positive random matrix on a random band around a
    /// random permutation, plus optional full support, then balanced.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Self {
        let mut perm: Vec<usize> = (0..n).collect();
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), rng);
        let full = rng.gen_bool(0.3);
        let band = rng.gen_range(0..=n / 4) as isize;
        let mut raw = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let near = (j as isize - perm[i] as isize).abs() <= band;
                if full || near {
                    raw[i * n + j] = rng.gen_range(0.05..1.0);
                }
            }
            raw[i * n + perm[i]] += 1.0;
        }
        Self::from_raw_balanced(n, raw).expect("support contains a permutation")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.mass[i * self.n + j]
    }

    /// Largest deviation of a row or column sum from `1/n`.
    pub fn margin_error(&self) -> f64 {
        let n = self.n;
        let target = 1.0 / n as f64;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let row: f64 = self.mass[i * n..(i + 1) * n].iter().sum();
            let col: f64 = (0..n).map(|r| self.mass[r * n + i]).sum();
            worst = worst.max((row - target).abs()).max((col - target).abs());
        }
        worst
    }

    fn balanced(mut self) -> Self {
        let n = self.n;
        let target = 1.0 / n as f64;
        for _ in 0..10_000 {
            for i in 0..n {
                let row = &mut self.mass[i * n..(i + 1) * n];
                let s: f64 = row.iter().sum();
                if s > 0.0 {
                    row.iter_mut().for_each(|v| *v *= target / s);
                }
            }
            for j in 0..n {
                let s: f64 = (0..n).map(|r| self.mass[r * n + j]).sum();
                if s > 0.0 {
                    (0..n).for_each(|r| self.mass[r * n + j] *= target / s);
                }
            }
            if self.margin_error() <= 1e-16 {
                break;
            }
        }
        self
    }

    /// Mass of `[0, i/n] × [0, j/n]`.
    fn corner(&self, i: usize, j: usize) -> f64 {
        (0..i)
            .map(|r| self.mass[r * self.n..r * self.n + j].iter().sum::<f64>())
            .sum()
    }

    // All corner values, `(n + 1)²` entries.
    fn corners(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; (n + 1) * (n + 1)];
        for i in 0..n {
            let mut row_acc = 0.0;
            for j in 0..n {
                row_acc += self.mass[i * n + j];
                out[(i + 1) * (n + 1) + j + 1] = out[i * (n + 1) + j + 1] + row_acc;
            }
        }
        out
    }

    /// `C(u, v)`, integrating the cell densities exactly.
    pub fn eval_c(&self, u: f64, v: f64) -> Result<f64> {
        for (what, x) in [("u", u), ("v", v)] {
            if !(0.0..=1.0).contains(&x) {
                return Err(Error::Domain {
                    what,
                    value: x,
                    expected: "[0, 1]",
                });
            }
        }
        let n = self.n as f64;
        let (nu, nv) = (u * n, v * n);
        let (iu, iv) = (nu.round(), nv.round());
        if (nu - iu).abs() < 1e-12 && (nv - iv).abs() < 1e-12 {
            return Ok(self.corner(iu as usize, iv as usize));
        }
        let share = |x: f64, k: usize| (x - k as f64).clamp(0.0, 1.0);
        let mut acc = 0.0;
        for i in 0..self.n {
            let fu = share(nu, i);
            if fu == 0.0 {
                break;
            }
            for j in 0..self.n {
                let fv = share(nv, j);
                if fv == 0.0 {
                    break;
                }
                acc += self.mass[i * self.n + j] * fu * fv;
            }
        }
        Ok(acc)
    }

    /// `C(p, p) = p` within [`DP_TOL`].
    pub fn in_dp(&self, p: f64) -> Result<bool> {
        check_level(p)?;
        Ok((self.eval_c(p, p)? - p).abs() <= DP_TOL)
    }

    /// Splits every cell into `r × r` equal sub-cells.
    pub fn refine(&self, r: usize) -> Self {
        let n = self.n;
        let m = n * r;
        let w = 1.0 / (r * r) as f64;
        let mut mass = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                mass[i * m + j] = self.mass[(i / r) * n + j / r] * w;
            }
        }
        Self { n: m, mass }
    }

    fn on_grid(&self, n: usize) -> Self {
        if n == self.n {
            self.clone()
        } else {
            self.refine(n / self.n)
        }
    }

    /// Grid-aligned `p = k/n`, returning `k`.
    fn grid_index(&self, p: f64) -> Result<usize> {
        check_level(p)?;
        let x = p * self.n as f64;
        let k = x.round();
        if (x - k).abs() > 1e-9 {
            return Err(Error::Grid(format!(
                "level {p} is not a multiple of 1/{}",
                self.n
            )));
        }
        Ok(k as usize)
    }

    /// `(t, s)`: the lowest `v` reachable given `U >= p` and the highest `v`
    /// reachable given `U <= p`, at cell resolution.
    pub fn tail_curves(&self, p: f64) -> Result<(f64, f64)> {
        let k = self.grid_index(p)?;
        Ok(self.tail_curves_at(k))
    }

    fn tail_curves_at(&self, k: usize) -> (f64, f64) {
        let n = self.n;
        let t = (k..n)
            .flat_map(|i| (0..n).filter(move |&j| self.at(i, j) > MASS_EPS))
            .min()
            .unwrap_or(n);
        let s = (0..k)
            .flat_map(|i| (0..n).filter(move |&j| self.at(i, j) > MASS_EPS))
            .max()
            .map_or(0, |j| j + 1);
        (t as f64 / n as f64, s as f64 / n as f64)
    }

    /// True when `t(k/n) < k/n < s(k/n)` at every interior grid level.
    pub fn is_strict_interior(&self) -> bool {
        (1..self.n).all(|k| {
            let (t, s) = self.tail_curves_at(k);
            let p = k as f64 / self.n as f64;
            t < p && p < s
        })
    }

    /// Grid version of the region between the tail curves: for row `i`, the
    /// inclusive column range from the lowest column used by rows `>= i` to
    /// the highest column used by rows `<= i`.
    pub fn b_region(&self) -> Vec<(usize, usize)> {
        let n = self.n;
        let used = |i: usize| (0..n).filter(move |&j| self.at(i, j) > MASS_EPS);
        let mut lo = vec![n; n];
        let mut running = n;
        for i in (0..n).rev() {
            running = running.min(used(i).min().unwrap_or(n));
            lo[i] = running;
        }
        let mut running = 0;
        let hi = (0..n).map(|i| {
            running = running.max(used(i).max().unwrap_or(0));
            running
        });
        lo.into_iter().zip(hi).collect()
    }

    /// Every cell of [`Self::b_region`] carries mass above [`MASS_EPS`].
    pub fn fills_b_region(&self, region: &[(usize, usize)]) -> bool {
        region
            .iter()
            .enumerate()
            .all(|(i, &(lo, hi))| (lo..=hi).all(|j| self.at(i, j) > MASS_EPS))
    }

    /// One discordant-swap step: with `(U', V')` an independent copy, `V` is
    /// replaced by `V'` whenever the two pairs are discordant. Cell masses of
    /// the result are exact; ties inside a row or column count one half.
    pub fn swap_transform(&self) -> Self {
        let n = self.n;
        let w = 1.0 / n as f64;
        let m = |i: usize, j: usize| self.mass[i * n + j];
        // h[i][j]: mass of row i strictly left of column j, half of the cell.
        let mut h = vec![0.0; n * n];
        // g[i][j]: mass of column j strictly below row i, half of the cell.
        let mut g = vec![0.0; n * n];
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                h[i * n + j] = acc + 0.5 * m(i, j);
                acc += m(i, j);
            }
        }
        for j in 0..n {
            let mut acc = 0.0;
            for i in 0..n {
                g[i * n + j] = acc + 0.5 * m(i, j);
                acc += m(i, j);
            }
        }
        let mass = (0..n * n)
            .into_par_iter()
            .map(|cell| {
                let (i, j) = (cell / n, cell % n);
                let (gi, hi) = (g[cell], h[cell]);
                let moved_in = gi * hi + (w - gi) * (w - hi);
                // P(U' below U) weighted by P(V' above V) and vice versa, summed
                // over the rows of the copy.
                let mut out_rate = 0.0;
                for i2 in 0..n {
                    let below = if i2 < i { 1.0 } else if i2 == i { 0.5 } else { 0.0 };
                    let hv = h[i2 * n + j];
                    out_rate += below * (w - hv) + (1.0 - below) * hv;
                }
                m(i, j) - m(i, j) * out_rate + moved_in
            })
            .collect();
        Self { n, mass }
    }

    /// Concordance-larger copula with mass spread over the grid region
    /// between the tail curves: `C/2 + C⁺/2`, then two swap steps.
    pub fn densify(&self) -> Self {
        let upper = Self::comonotone(self.n);
        let start = mix(&[(self, 0.5), (&upper, 0.5)]).expect("weights sum to one");
        let out = start.swap_transform().swap_transform();
        if out.margin_error() > MARGIN_TOL {
            out.balanced()
        } else {
            out
        }
    }

    /// Sample path of the Markov chain whose consecutive pairs have this
    /// copula, started from a uniform draw.
    pub fn markov_chain(&self, length: usize, seed: u64) -> Vec<f64> {
        let sampler = ChainSampler::new(self);
        let mut rng = rng_for(seed, 0);
        sampler.path(length, &mut rng)
    }

    /// Runs `replications` chains of `length` steps and summarizes how far
    /// their running means stay from `1/2`.
    pub fn lln_diagnostic(&self, cfg: &LlnConfig) -> Result<ChainDiagnostics> {
        cfg.validate()?;
        if let Some(p) = cfg.p_opt {
            check_level(p)?;
        }
        let sampler = ChainSampler::new(self);
        let n = cfg.length;
        let step = (n / 100).max(1);
        let checkpoints: Vec<usize> = (1..=n / step).map(|c| c * step).collect();
        let half = n / 2;
        let runs: Vec<ChainRun> = (0..cfg.replications)
            .into_par_iter()
            .map(|r| {
                let mut rng = rng_for(cfg.seed, r as u64);
                let path = sampler.path(n, &mut rng);
                let mut acc = 0.0;
                let mut sup: f64 = 0.0;
                let mut partial = Vec::with_capacity(checkpoints.len());
                for (t, x) in path.iter().enumerate() {
                    acc += x;
                    let count = t + 1;
                    let mean = acc / count as f64;
                    if count >= half {
                        sup = sup.max((mean - 0.5).abs());
                    }
                    if count % step == 0 {
                        partial.push(mean);
                    }
                }
                let final_mean = acc / n as f64;
                // Batch-means estimate of N·Var(mean_N) from this chain alone.
                let size = n / BATCHES;
                let batch_var = path[..size * BATCHES]
                    .chunks(size)
                    .map(|b| (b.iter().sum::<f64>() / size as f64 - final_mean).powi(2))
                    .sum::<f64>()
                    * size as f64
                    / (BATCHES - 1) as f64;
                ChainRun {
                    start: path[0],
                    final_mean,
                    sup_deviation: sup,
                    batch_var,
                    partial,
                }
            })
            .collect();

        let finals: Vec<f64> = runs.iter().map(|r| r.final_mean).collect();
        let devs: Vec<f64> = finals.iter().map(|m| (m - 0.5).abs()).collect();
        let sups: Vec<f64> = runs.iter().map(|r| r.sup_deviation).collect();
        let deviation = Quantiles::of(&devs);
        let sup_deviation = Quantiles::of(&sups);
        let iid_band = cfg.band_sigmas / (12.0 * n as f64).sqrt();
        let long_run_var = runs.iter().map(|r| r.batch_var).sum::<f64>() / runs.len() as f64;
        let batch_band = cfg.band_sigmas * (long_run_var / n as f64).sqrt();
        let band = match cfg.band {
            Band::Iid => iid_band,
            Band::BatchMeans => batch_band,
        };
        let verdict = if deviation.q90 < band {
            Verdict::Diversifiable
        } else if deviation.q90 > cfg.floor {
            Verdict::NonDiversifiable
        } else {
            Verdict::Inconclusive
        };
        let tail = match cfg.p_opt {
            Some(p) => {
                let hits: Vec<f64> = runs
                    .iter()
                    .filter(|r| r.start > p)
                    .map(|r| r.final_mean)
                    .collect();
                Some(TailConditional {
                    level: p,
                    in_dp: self.in_dp(p)?,
                    chains: hits.len(),
                    mean: if hits.is_empty() {
                        f64::NAN
                    } else {
                        hits.iter().sum::<f64>() / hits.len() as f64
                    },
                    target: 0.5 * (1.0 + p),
                })
            }
            None => None,
        };
        Ok(ChainDiagnostics {
            length: n,
            replications: cfg.replications,
            final_means: finals,
            deviation,
            sup_deviation,
            sup_from: half,
            band_kind: cfg.band,
            band,
            iid_band,
            batch_band,
            autocorrelation_time: 12.0 * long_run_var,
            floor: cfg.floor,
            verdict,
            tail,
            checkpoints,
            partial_means: runs.into_iter().map(|r| r.partial).collect(),
        })
    }
}

/// Cellwise convex combination on the least common refinement of the grids.
pub fn mix(parts: &[(&CheckerboardCopula, f64)]) -> Result<CheckerboardCopula> {
    if parts.is_empty() {
        return Err(Error::Copula("nothing to mix".into()));
    }
    if let Some(&(_, l)) = parts.iter().find(|&&(_, l)| !(l.is_finite() && l >= 0.0)) {
        return Err(Error::Domain {
            what: "mixing weight",
            value: l,
            expected: "[0, ∞)",
        });
    }
    let total: f64 = parts.iter().map(|&(_, l)| l).sum();
    if (total - 1.0).abs() > BALANCE_TOL {
        return Err(Error::Domain {
            what: "sum of mixing weights",
            value: total,
            expected: "1",
        });
    }
    let n = parts.iter().map(|(c, _)| c.n).fold(1, lcm);
    let mut mass = vec![0.0; n * n];
    for &(c, l) in parts {
        let fine = c.on_grid(n);
        mass.iter_mut().zip(&fine.mass).for_each(|(a, b)| *a += l / total * b);
    }
    Ok(CheckerboardCopula { n, mass })
}

/// `C1 <= C2` at every grid corner of the common refinement, up to rounding.
pub fn concordance_leq(c1: &CheckerboardCopula, c2: &CheckerboardCopula) -> bool {
    let n = lcm(c1.n, c2.n);
    let (a, b) = (c1.on_grid(n).corners(), c2.on_grid(n).corners());
    a.iter().zip(&b).all(|(x, y)| *x <= y + DP_TOL)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

// Row-wise conditional CDFs, scaled to end at one.
struct ChainSampler {
    n: usize,
    cdf: Vec<f64>,
}

impl ChainSampler {
    fn new(c: &CheckerboardCopula) -> Self {
        let n = c.n;
        let mut cdf = vec![0.0; n * n];
        for i in 0..n {
            let row = &c.mass[i * n..(i + 1) * n];
            let total: f64 = row.iter().sum();
            let mut acc = 0.0;
            for j in 0..n {
                acc += row[j];
                cdf[i * n + j] = acc / total;
            }
            cdf[i * n + n - 1] = 1.0;
        }
        Self { n, cdf }
    }

    // Inverse of the conditional CDF of V given U in row `i`, linear inside
    // each cell. The within-cell fraction stays below one so a draw never
    // lands on the upper edge of its cell.
    fn next(&self, x: f64, u: f64) -> f64 {
        let n = self.n;
        let i = ((x * n as f64) as usize).min(n - 1);
        let row = &self.cdf[i * n..(i + 1) * n];
        let j = row.partition_point(|&c| c <= u).min(n - 1);
        let lo = if j == 0 { 0.0 } else { row[j - 1] };
        let frac = ((u - lo) / (row[j] - lo)).clamp(0.0, 1.0 - 1e-12);
        (j as f64 + frac) / n as f64
    }

    fn path(&self, length: usize, rng: &mut SeededRng) -> Vec<f64> {
        let mut out = Vec::with_capacity(length);
        if length == 0 {
            return out;
        }
        let mut x: f64 = rng.gen();
        out.push(x);
        for _ in 1..length {
            x = self.next(x, rng.gen());
            out.push(x);
        }
        out
    }
}

struct ChainRun {
    start: f64,
    final_mean: f64,
    sup_deviation: f64,
    batch_var: f64,
    partial: Vec<f64>,
}

const BATCHES: usize = 20;

/// How the diversifiable band around `1/2` is scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    /// `k/√(12N)`: the spread of an iid uniform mean.
    Iid,
    /// `k·σ/√N` with `σ²` the long-run variance estimated from batch means
    /// within each chain. Correlated but ergodic chains fit inside it; offsets
    /// between chains do not widen it.
    BatchMeans,
}

/// Settings of [`CheckerboardCopula::lln_diagnostic`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LlnConfig {
    pub length: usize,
    pub replications: usize,
    pub p_opt: Option<f64>,
    pub seed: u64,
    pub band: Band,
    /// Width of the band in standard deviations of the sample mean.
    pub band_sigmas: f64,
    /// Deviation above which the chain is declared non-diversifiable.
    pub floor: f64,
}

impl LlnConfig {
    pub fn new(length: usize, replications: usize, seed: u64) -> Self {
        Self {
            length,
            replications,
            p_opt: None,
            seed,
            band: Band::BatchMeans,
            band_sigmas: 3.0,
            floor: 0.05,
        }
    }

    pub fn with_level(mut self, p: f64) -> Self {
        self.p_opt = Some(p);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.length < 100 || self.length < 2 * BATCHES {
            return Err(Error::Domain {
                what: "chain length",
                value: self.length as f64,
                expected: "[100, ∞)",
            });
        }
        if self.replications < 10 {
            return Err(Error::Domain {
                what: "replications",
                value: self.replications as f64,
                expected: "[10, ∞)",
            });
        }
        if !(self.band_sigmas > 0.0 && self.floor > 0.0) {
            return Err(Error::Domain {
                what: "threshold",
                value: self.band_sigmas.min(self.floor),
                expected: "(0, ∞)",
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Diversifiable,
    NonDiversifiable,
    Inconclusive,
}

/// Left quantiles of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quantiles {
    pub q50: f64,
    pub q90: f64,
    pub q99: f64,
    pub max: f64,
}

impl Quantiles {
    fn of(xs: &[f64]) -> Self {
        let d = DiscreteDistribution::uniform(xs).expect("non-empty finite sample");
        let q = |p| d.quantile(p).expect("level inside (0, 1)");
        Self {
            q50: q(0.5),
            q90: q(0.9),
            q99: q(0.99),
            max: d.max(),
        }
    }
}

/// Running means of chains started in the upper tail `X_1 > p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailConditional {
    pub level: f64,
    pub in_dp: bool,
    pub chains: usize,
    pub mean: f64,
    /// `(1 + p)/2`, the upper-tail mean of a uniform.
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainDiagnostics {
    pub length: usize,
    pub replications: usize,
    #[serde(skip)]
    pub final_means: Vec<f64>,
    /// Quantiles of `|mean_N − 1/2|` across chains.
    pub deviation: Quantiles,
    /// Quantiles of `sup_{n >= N/2} |mean_n − 1/2|`.
    pub sup_deviation: Quantiles,
    pub sup_from: usize,
    pub band_kind: Band,
    /// Band used for the verdict.
    pub band: f64,
    pub iid_band: f64,
    pub batch_band: f64,
    /// Long-run variance over `1/12`; one for iid uniforms.
    pub autocorrelation_time: f64,
    pub floor: f64,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail: Option<TailConditional>,
    #[serde(skip)]
    pub checkpoints: Vec<usize>,
    #[serde(skip)]
    pub partial_means: Vec<Vec<f64>>,
}

impl ChainDiagnostics {
    /// Long-format CSV `chain,step,partial_mean`.
    pub fn partial_means_csv(&self) -> String {
        let mut out = String::from("chain,step,partial_mean\n");
        for (r, row) in self.partial_means.iter().enumerate() {
            for (step, m) in self.checkpoints.iter().zip(row) {
                out.push_str(&format!("{r},{step},{}\n", crate::fmt::g12(*m)));
            }
        }
        out
    }
}
