//! Finite discrete loss distributions.
//!
//! A [`DiscreteDistribution`] is kept in canonical form: atom values strictly
//! increasing, equal values merged, probabilities positive and summing to one.
//! Quantile-level arithmetic (ES integrals, conditional restrictions, the
//! midpoint transform) is done exactly on the step quantile function.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{check_level, Error, Result};

/// Maximum deviation of the probability total from one in canonical form.
pub const PROB_TOL: f64 = 1e-12;

/// Inputs whose probabilities sum to within this of one are renormalized.
pub const RENORM_TOL: f64 = 1e-9;

/// Slack used when comparing cumulative probabilities against a level, and
/// when merging quantile breakpoints.
pub(crate) const CUM_TOL: f64 = 1e-12;

/// One support point of a distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub value: f64,
    pub prob: f64,
}

/// A probability law with finitely many atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Atom>", into = "Vec<Atom>")]
pub struct DiscreteDistribution {
    values: Vec<f64>,
    probs: Vec<f64>,
    // cum[i] = P(X <= values[i]); last entry pinned to 1.
    cum: Vec<f64>,
}

impl TryFrom<Vec<Atom>> for DiscreteDistribution {
    type Error = Error;

    fn try_from(atoms: Vec<Atom>) -> Result<Self> {
        Self::new(atoms.into_iter().map(|a| (a.value, a.prob)))
    }
}

impl From<DiscreteDistribution> for Vec<Atom> {
    fn from(d: DiscreteDistribution) -> Self {
        d.atoms().collect()
    }
}

impl DiscreteDistribution {
    /// Builds a distribution from `(value, prob)` pairs.
    ///
    /// Atoms are sorted and equal values merged. Probabilities must be
    /// positive; a total within [`RENORM_TOL`] of one is renormalized, anything
    /// further off is rejected.
    pub fn new<I>(atoms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        let mut pairs: Vec<(f64, f64)> = atoms.into_iter().collect();
        if pairs.is_empty() {
            return Err(Error::Distribution("no atoms".into()));
        }
        for &(v, p) in &pairs {
            if !v.is_finite() {
                return Err(Error::Distribution(format!("non-finite value {v}")));
            }
            if !(p.is_finite() && p > 0.0) {
                return Err(Error::Distribution(format!(
                    "probability {p} at value {v} is not positive"
                )));
            }
        }
        let total: f64 = pairs.iter().map(|&(_, p)| p).sum();
        if (total - 1.0).abs() > RENORM_TOL {
            return Err(Error::Distribution(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self::from_sorted_unchecked(pairs, total))
    }

    // `pairs` must be sorted by value with positive weights summing to `total`.
    fn from_sorted_unchecked(pairs: Vec<(f64, f64)>, total: f64) -> Self {
        let mut values = Vec::with_capacity(pairs.len());
        let mut probs: Vec<f64> = Vec::with_capacity(pairs.len());
        for (v, p) in pairs {
            match values.last() {
                Some(&last) if last == v => *probs.last_mut().unwrap() += p,
                _ => {
                    values.push(v);
                    probs.push(p);
                }
            }
        }
        if total != 1.0 {
            probs.iter_mut().for_each(|p| *p /= total);
        }
        let mut cum = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for &p in &probs {
            acc += p;
            cum.push(acc);
        }
        *cum.last_mut().unwrap() = 1.0;
        Self { values, probs, cum }
    }

    /// Builds a distribution from weighted pieces that may carry zero or
    /// negligible weight; such pieces are dropped and the rest renormalized.
    pub(crate) fn from_pieces(mut pieces: Vec<(f64, f64)>) -> Self {
        pieces.retain(|&(_, w)| w > 0.0);
        debug_assert!(!pieces.is_empty());
        let total: f64 = pieces.iter().map(|&(_, w)| w).sum();
        pieces.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self::from_sorted_unchecked(pieces, total)
    }

    /// A point mass at `c`.
    pub fn point(c: f64) -> Result<Self> {
        Self::new([(c, 1.0)])
    }

    /// Equal weights on each listed value (repeats accumulate).
    pub fn uniform(values: &[f64]) -> Result<Self> {
        let w = 1.0 / values.len().max(1) as f64;
        Self::new(values.iter().map(|&v| (v, w)))
    }

    /// Law of a scenario vector with the given scenario weights.
    pub fn from_weighted(values: &[f64], weights: &[f64]) -> Result<Self> {
        if values.len() != weights.len() {
            return Err(Error::Dimension {
                expected: values.len(),
                got: weights.len(),
                context: "scenario weights",
            });
        }
        Self::new(values.iter().copied().zip(weights.iter().copied()))
    }

    /// Mixture `Σ w_i · d_i`; weights must sum to one.
    pub fn mixture(parts: &[(f64, &DiscreteDistribution)]) -> Result<Self> {
        let mut pairs = Vec::new();
        for &(w, d) in parts {
            if w < 0.0 {
                return Err(Error::Distribution(format!("negative mixture weight {w}")));
            }
            if w > 0.0 {
                pairs.extend(d.atoms().map(|a| (a.value, w * a.prob)));
            }
        }
        Self::new(pairs)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn atoms(&self) -> impl Iterator<Item = Atom> + '_ {
        self.values
            .iter()
            .zip(&self.probs)
            .map(|(&value, &prob)| Atom { value, prob })
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        *self.values.last().unwrap()
    }

    pub fn mean(&self) -> f64 {
        self.atoms().map(|a| a.value * a.prob).sum()
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        self.atoms().map(|a| a.prob * (a.value - mu).powi(2)).sum()
    }

    pub fn is_constant(&self) -> bool {
        self.values.len() == 1
    }

    /// `P(X <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        match self.values.partition_point(|&v| v <= x) {
            0 => 0.0,
            k => self.cum[k - 1],
        }
    }

    // First atom whose cumulative probability reaches `p - tol`.
    fn index_at(&self, p: f64, tol: f64) -> usize {
        self.cum
            .partition_point(|&c| c < p - tol)
            .min(self.values.len() - 1)
    }

    /// Left quantile `inf{x : F(x) >= p}`, i.e. `VaR_p`.
    ///
    /// Cumulative probabilities within `1e-12` of `p` count as reaching it,
    /// so grid-aligned levels are not pushed to the next atom by rounding.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        check_level(p)?;
        Ok(self.values[self.index_at(p, CUM_TOL)])
    }

    /// Exact step evaluation used for interior points that sit away from
    /// breakpoints.
    fn quantile_exact(&self, u: f64) -> f64 {
        self.values[self.index_at(u, 0.0)]
    }

    /// `ess-sup − ess-inf`.
    pub fn range_width(&self) -> f64 {
        self.max() - self.min()
    }

    /// Probability mass of each atom inside the quantile interval `(lo, hi)`.
    pub(crate) fn level_overlaps(&self, lo: f64, hi: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let mut prev: f64 = 0.0;
        self.values.iter().zip(&self.cum).map(move |(&v, &c)| {
            let overlap = (c.min(hi) - prev.max(lo)).max(0.0);
            prev = c;
            (v, overlap)
        })
    }

    /// `∫_lo^hi F^{-1}(u) du` for `0 <= lo <= hi <= 1`.
    pub fn quantile_integral(&self, lo: f64, hi: f64) -> f64 {
        self.level_overlaps(lo, hi).map(|(v, w)| v * w).sum()
    }

    /// Law of `F^{-1}(U)` with `U` uniform on `(lo, hi)`.
    ///
    /// Atoms straddling a bound are split; slivers shorter than `1e-12` in
    /// level are treated as rounding noise and dropped.
    pub fn restrict(&self, lo: f64, hi: f64) -> Result<Self> {
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return Err(Error::Domain {
                what: "quantile interval width",
                value: hi - lo,
                expected: "0 <= lo < hi <= 1",
            });
        }
        let pieces: Vec<(f64, f64)> = self
            .level_overlaps(lo, hi)
            .filter(|&(_, w)| w > CUM_TOL)
            .collect();
        if pieces.is_empty() {
            // Interval narrower than the snapping tolerance.
            let v = self.quantile_exact(0.5 * (lo + hi));
            return Self::point(v);
        }
        Ok(Self::from_pieces(pieces))
    }

    /// Law of `(F^{-1}(U) + F^{-1}(1 − U)) / 2` for `U` uniform.
    ///
    /// The breakpoints of `u ↦ F^{-1}(u)` and `u ↦ F^{-1}(1 − u)` are merged
    /// into one partition of `(0, 1)`; each piece contributes its length at
    /// the averaged value. The result has the same mean and at most half the
    /// range width.
    pub fn t_transform(&self) -> Self {
        if self.is_constant() {
            return self.clone();
        }
        let inner = &self.cum[..self.cum.len() - 1];
        let mut breaks: Vec<f64> = Vec::with_capacity(2 * inner.len() + 2);
        breaks.push(0.0);
        breaks.extend_from_slice(inner);
        breaks.extend(inner.iter().map(|c| 1.0 - c));
        breaks.push(1.0);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup_by(|b, a| *b - *a <= CUM_TOL);
        *breaks.last_mut().unwrap() = 1.0;

        let pieces = breaks
            .windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                let v = 0.5 * (self.quantile_exact(mid) + self.quantile_exact(1.0 - mid));
                (v, w[1] - w[0])
            })
            .collect();
        Self::from_pieces(pieces)
    }

    /// Applies `x ↦ a·x + b` to every atom.
    pub fn affine(&self, a: f64, b: f64) -> Result<Self> {
        Self::new(self.atoms().map(|t| (a * t.value + b, t.prob)))
    }

    /// Checks the canonical-form invariants. Always true for values built by
    /// this module; exposed for tests and external callers.
    pub fn is_canonical(&self) -> bool {
        let increasing = self.values.windows(2).all(|w| w[0] < w[1]);
        let positive = self.probs.iter().all(|&p| p > 0.0);
        let total: f64 = self.probs.iter().sum();
        increasing && positive && (total - 1.0).abs() <= PROB_TOL
    }

    /// Reads a two-column `value,prob` CSV with a header row.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
        let (vi, pi) = match (col("value"), col("prob")) {
            (Some(v), Some(p)) => (v, p),
            _ => {
                return Err(Error::Parse {
                    row: 1,
                    column: 1,
                    message: "expected header `value,prob`".into(),
                })
            }
        };
        let mut atoms = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = i + 2;
            let field = |c: usize| -> Result<f64> {
                let raw = rec.get(c).unwrap_or("");
                raw.parse().map_err(|_| Error::Parse {
                    row,
                    column: c + 1,
                    message: format!("`{raw}` is not a number"),
                })
            };
            atoms.push((field(vi)?, field(pi)?));
        }
        Self::new(atoms)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    /// Writes `value,prob` rows with 12 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "value,prob")?;
        for a in self.atoms() {
            writeln!(w, "{},{}", crate::fmt::g12(a.value), crate::fmt::g12(a.prob))?;
        }
        Ok(())
    }

    /// JSON array of `{value, prob}` objects.
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}
