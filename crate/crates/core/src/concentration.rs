//! Scenario sets, common tail events and the collapse iteration.
//!
//! A scenario set is a weighted list of joint loss outcomes. A set of
//! positions is concentrated at level `p` when one scenario subset of weight
//! `1 − p` carries the largest losses of every position at once.

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::Serialize;

use crate::dist::{DiscreteDistribution, RENORM_TOL};
use crate::error::{check_level, Error, Result};
use crate::fmt::g12;
use crate::risk;
use crate::sampling::rng_for;

/// Weight tolerance for tail events.
pub const EVENT_TOL: f64 = 1e-10;

/// Largest tie set searched exhaustively for an exact weight.
const EXHAUSTIVE_TIES: usize = 20;

/// `m` weighted scenarios of `k` position losses.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioSet {
    losses: Vec<Vec<f64>>,
    weights: Vec<f64>,
    labels: Vec<String>,
    equal_weights_assumed: bool,
}

impl ScenarioSet {
    /// Rows are scenarios. Weights within [`RENORM_TOL`] of summing to one
    /// are renormalized.
    pub fn new(losses: Vec<Vec<f64>>, weights: Vec<f64>, labels: Vec<String>) -> Result<Self> {
        let m = losses.len();
        if m == 0 {
            return Err(Error::Scenarios("no scenarios".into()));
        }
        let k = labels.len();
        if k == 0 {
            return Err(Error::Scenarios("no positions".into()));
        }
        for row in &losses {
            if row.len() != k {
                return Err(Error::Dimension {
                    expected: k,
                    got: row.len(),
                    context: "scenario row",
                });
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite()) {
                return Err(Error::Scenarios(format!("non-finite loss {v}")));
            }
        }
        if weights.len() != m {
            return Err(Error::Dimension {
                expected: m,
                got: weights.len(),
                context: "scenario weights",
            });
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::Scenarios(format!("weight {w} is not positive")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > RENORM_TOL {
            return Err(Error::Scenarios(format!("weights sum to {total}, not 1")));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(Self {
            losses,
            weights,
            labels,
            equal_weights_assumed: false,
        })
    }

    /// Equally weighted scenarios with labels `X1, X2, …`.
    pub fn equiprobable(losses: Vec<Vec<f64>>) -> Result<Self> {
        let k = losses.first().map_or(0, Vec::len);
        let m = losses.len();
        let labels = (1..=k).map(|i| format!("X{i}")).collect();
        Self::new(losses, vec![1.0 / m.max(1) as f64; m], labels)
    }

    /// Builds the set from position columns of equal length.
    pub fn from_columns(columns: &[Vec<f64>], weights: Vec<f64>) -> Result<Self> {
        let m = columns.first().map_or(0, Vec::len);
        if let Some(c) = columns.iter().find(|c| c.len() != m) {
            return Err(Error::Dimension {
                expected: m,
                got: c.len(),
                context: "scenario column",
            });
        }
        let rows = (0..m).map(|s| columns.iter().map(|c| c[s]).collect()).collect();
        let labels = (1..=columns.len()).map(|i| format!("X{i}")).collect();
        Self::new(rows, weights, labels)
    }

    pub fn m(&self) -> usize {
        self.losses.len()
    }

    pub fn k(&self) -> usize {
        self.labels.len()
    }

    pub fn losses(&self) -> &[Vec<f64>] {
        &self.losses
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// True when the set was read without a weight column.
    pub fn equal_weights_assumed(&self) -> bool {
        self.equal_weights_assumed
    }

    pub fn column(&self, i: usize) -> Vec<f64> {
        self.losses.iter().map(|r| r[i]).collect()
    }

    /// Scenario-wise sum of all positions.
    pub fn total(&self) -> Vec<f64> {
        self.losses.iter().map(|r| r.iter().sum()).collect()
    }

    /// Scenario-wise `aᵀx`.
    pub fn combine(&self, a: &[f64]) -> Result<Vec<f64>> {
        if a.len() != self.k() {
            return Err(Error::Dimension {
                expected: self.k(),
                got: a.len(),
                context: "position weights",
            });
        }
        Ok(self
            .losses
            .iter()
            .map(|r| r.iter().zip(a).map(|(x, w)| x * w).sum())
            .collect())
    }

    /// Law of a scenario vector under the scenario weights.
    pub fn law(&self, values: &[f64]) -> DiscreteDistribution {
        DiscreteDistribution::from_weighted(values, &self.weights).expect("validated weights")
    }

    pub fn marginal(&self, i: usize) -> DiscreteDistribution {
        self.law(&self.column(i))
    }

    pub fn weight_of(&self, event: &[usize]) -> f64 {
        event.iter().map(|&s| self.weights[s]).sum()
    }

    /// Keeps the positions listed in `cols`.
    pub fn select(&self, cols: &[usize]) -> Self {
        Self {
            losses: self
                .losses
                .iter()
                .map(|r| cols.iter().map(|&c| r[c]).collect())
                .collect(),
            weights: self.weights.clone(),
            labels: cols.iter().map(|&c| self.labels[c].clone()).collect(),
            equal_weights_assumed: self.equal_weights_assumed,
        }
    }

    /// Multiplies every loss by `lambda`.
    pub fn scaled(&self, lambda: f64) -> Self {
        let mut out = self.clone();
        out.losses
            .iter_mut()
            .for_each(|r| r.iter_mut().for_each(|x| *x *= lambda));
        out
    }

    /// Reads a scenario CSV: a header of position labels plus an optional
    /// `weight` column, then one row per scenario. Without a weight column all
    /// scenarios get equal weight.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let weight_col = headers.iter().position(|h| h.eq_ignore_ascii_case("weight"));
        let labels: Vec<String> = headers
            .iter()
            .enumerate()
            .filter(|&(c, _)| Some(c) != weight_col)
            .map(|(_, h)| h.to_string())
            .collect();
        let mut losses = Vec::new();
        let mut weights = Vec::new();
        for (r, rec) in rdr.records().enumerate() {
            let row = r + 2;
            let rec = rec.map_err(|e| Error::Parse {
                row,
                column: 0,
                message: e.to_string(),
            })?;
            if rec.len() != headers.len() {
                return Err(Error::Parse {
                    row,
                    column: rec.len().min(headers.len()) + 1,
                    message: format!("expected {} fields, found {}", headers.len(), rec.len()),
                });
            }
            let mut line = Vec::with_capacity(labels.len());
            for (c, field) in rec.iter().enumerate() {
                let x: f64 = field.parse().map_err(|_| Error::Parse {
                    row,
                    column: c + 1,
                    message: format!("`{field}` is not a number"),
                })?;
                if !x.is_finite() {
                    return Err(Error::Parse {
                        row,
                        column: c + 1,
                        message: format!("`{field}` is not finite"),
                    });
                }
                if Some(c) == weight_col {
                    weights.push(x);
                } else {
                    line.push(x);
                }
            }
            losses.push(line);
        }
        let assumed = weight_col.is_none();
        if assumed {
            weights = vec![1.0 / losses.len().max(1) as f64; losses.len()];
        }
        let mut set = Self::new(losses, weights, labels)?;
        set.equal_weights_assumed = assumed;
        Ok(set)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    /// Writes the set with an explicit `weight` column.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header: Vec<&str> = self.labels.iter().map(String::as_str).collect();
        header.push("weight");
        wtr.write_record(&header)?;
        for (row, &wt) in self.losses.iter().zip(&self.weights) {
            let mut rec: Vec<String> = row.iter().map(|&x| g12(x)).collect();
            rec.push(g12(wt));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("ascii output")
    }
}

/// Proof that a scenario subset is a common `p`-tail event.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailCertificate {
    /// Scenario indices, ascending.
    pub event: Vec<usize>,
    pub level: f64,
    /// `VaR_p` of each position.
    pub per_position_threshold: Vec<f64>,
}

impl TailCertificate {
    /// Checks weight and ordering against `s`.
    pub fn verify(&self, s: &ScenarioSet) -> bool {
        if (s.weight_of(&self.event) - (1.0 - self.level)).abs() > EVENT_TOL {
            return false;
        }
        let inside: BTreeSet<usize> = self.event.iter().copied().collect();
        (0..s.k()).all(|i| {
            let lo_in = self
                .event
                .iter()
                .map(|&w| s.losses[w][i])
                .fold(f64::INFINITY, f64::min);
            let hi_out = (0..s.m())
                .filter(|w| !inside.contains(w))
                .map(|w| s.losses[w][i])
                .fold(f64::NEG_INFINITY, f64::max);
            lo_in >= hi_out
        })
    }
}

/// Outcome of the common tail event search.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum TailVerdict {
    Certificate(TailCertificate),
    /// No scenario subset can be a tail event of every position.
    NotConcentrated { reason: String },
    /// The ordering constraints can be met, but no admissible subset has
    /// weight exactly `1 − p`.
    NotRepresentable { reason: String },
}

impl TailVerdict {
    pub fn certificate(&self) -> Option<&TailCertificate> {
        match self {
            Self::Certificate(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_certificate(&self) -> bool {
        self.certificate().is_some()
    }
}

/// Searches for a scenario subset of weight `1 − p` on which every position
/// takes its largest losses.
///
/// Any such event must contain every scenario with a loss above some
/// position's `VaR_p` and only scenarios at or above every position's
/// `VaR_p`. The scenarios in between sit exactly at the thresholds in all
/// positions, so any of them may be added; they are filled greedily and, when
/// few enough, searched exhaustively for an exact weight.
pub fn find_common_tail_event(s: &ScenarioSet, p: f64) -> Result<TailVerdict> {
    check_level(p)?;
    let k = s.k();
    let thresholds: Vec<f64> = (0..k)
        .map(|i| risk::var(&s.marginal(i), p))
        .collect::<Result<_>>()?;
    let above = |w: usize, i: usize| s.losses[w][i] > thresholds[i];
    let at_least = |w: usize, i: usize| s.losses[w][i] >= thresholds[i];

    let mandatory: Vec<usize> = (0..s.m()).filter(|&w| (0..k).any(|i| above(w, i))).collect();
    if let Some(&w) = mandatory.iter().find(|&&w| !(0..k).all(|i| at_least(w, i))) {
        let (hi, lo) = (0..k)
            .find(|&i| above(w, i))
            .zip((0..k).find(|&i| !at_least(w, i)))
            .expect("scenario exceeds one threshold and misses another");
        return Ok(TailVerdict::NotConcentrated {
            reason: format!(
                "scenario {w} is in the upper tail of {} but below the threshold of {}",
                s.labels[hi], s.labels[lo]
            ),
        });
    }
    let ties: Vec<usize> = (0..s.m())
        .filter(|&w| (0..k).all(|i| at_least(w, i)) && !(0..k).any(|i| above(w, i)))
        .collect();

    let target = 1.0 - p;
    let base = s.weight_of(&mandatory);
    let tie_weight = s.weight_of(&ties);
    if base > target + EVENT_TOL {
        return Ok(TailVerdict::NotConcentrated {
            reason: format!("scenarios above a threshold weigh {base}, more than {target}"),
        });
    }
    if base + tie_weight < target - EVENT_TOL {
        return Ok(TailVerdict::NotConcentrated {
            reason: format!(
                "scenarios at or above every threshold weigh {}, less than {target}",
                base + tie_weight
            ),
        });
    }

    let need = target - base;
    let chosen = fill_ties(s, &ties, need);
    match chosen {
        Some(extra) => {
            let mut event = mandatory;
            event.extend(extra);
            event.sort_unstable();
            Ok(TailVerdict::Certificate(TailCertificate {
                event,
                level: p,
                per_position_threshold: thresholds,
            }))
        }
        None => Ok(TailVerdict::NotRepresentable {
            reason: format!(
                "no subset of the {} threshold scenarios weighs {}",
                ties.len(),
                crate::fmt::g12(need)
            ),
        }),
    }
}

// Picks tie scenarios whose weights add up to `need`.
fn fill_ties(s: &ScenarioSet, ties: &[usize], need: f64) -> Option<Vec<usize>> {
    if need.abs() <= EVENT_TOL {
        return Some(Vec::new());
    }
    // Heaviest first; ties are identical across positions so any order is
    // admissible.
    let mut order = ties.to_vec();
    order.sort_by(|&a, &b| s.weights[b].total_cmp(&s.weights[a]).then(a.cmp(&b)));
    let mut acc = 0.0;
    let mut picked = Vec::new();
    for &w in &order {
        if acc + s.weights[w] <= need + EVENT_TOL {
            acc += s.weights[w];
            picked.push(w);
        }
    }
    if (acc - need).abs() <= EVENT_TOL {
        return Some(picked);
    }
    if ties.len() > EXHAUSTIVE_TIES {
        return None;
    }
    (1u32..1 << ties.len()).find_map(|mask| {
        let subset: Vec<usize> = (0..ties.len())
            .filter(|b| mask >> b & 1 == 1)
            .map(|b| ties[b])
            .collect();
        ((s.weight_of(&subset) - need).abs() <= EVENT_TOL).then_some(subset)
    })
}

/// `Σ_i ES_p(X_i) − ES_p(Σ_i X_i)`; nonnegative up to rounding.
pub fn es_gap(s: &ScenarioSet, p: f64) -> Result<f64> {
    let parts: f64 = (0..s.k())
        .map(|i| risk::es(&s.marginal(i), p))
        .sum::<Result<f64>>()?;
    Ok(parts - risk::es(&s.law(&s.total()), p)?)
}

/// True iff ES is additive on the positions: pairwise for every pair and for
/// the full sum.
pub fn es_additivity_test(s: &ScenarioSet, p: f64, tol: f64) -> Result<bool> {
    check_level(p)?;
    if es_gap(s, p)? > tol {
        return Ok(false);
    }
    if s.k() > 2 {
        for i in 0..s.k() {
            for j in i + 1..s.k() {
                if es_gap(&s.select(&[i, j]), p)? > tol {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// Pairing of the second marginal within the two level blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoupleStyle {
    Comonotone,
    /// Reversed inside `(0, p)` and inside `(p, 1)`.
    TailBlockAntitone,
    /// Uniformly permuted inside each block.
    TailBlockShuffle { seed: u64 },
}

/// Number of grid points below `p` when `m·p` is an integer.
pub fn block_size(m: usize, p: f64) -> Result<usize> {
    check_level(p)?;
    let mp = m as f64 * p;
    let lower = mp.round();
    if m == 0 || (mp - lower).abs() > 1e-9 {
        return Err(Error::Grid(format!("m·p = {mp} is not an integer for m = {m}")));
    }
    Ok(lower as usize)
}

/// Joins two marginals into `m` equally likely scenarios that share a common
/// `p`-tail event.
///
/// Both marginals are read off the grid `u_j = (j − ½)/m`. The second one is
/// paired with the first inside the blocks `(0, p)` and `(p, 1)` according to
/// `style`.
pub fn couple(
    dx: &DiscreteDistribution,
    dy: &DiscreteDistribution,
    p: f64,
    style: CoupleStyle,
    m: usize,
) -> Result<ScenarioSet> {
    let lower = block_size(m, p)?;
    let grid = |d: &DiscreteDistribution| -> Result<Vec<f64>> {
        (0..m)
            .map(|j| d.quantile((j as f64 + 0.5) / m as f64))
            .collect()
    };
    let xs = grid(dx)?;
    let ys = grid(dy)?;
    let mut pairing: Vec<usize> = (0..m).collect();
    match style {
        CoupleStyle::Comonotone => {}
        CoupleStyle::TailBlockAntitone => {
            pairing[..lower].reverse();
            pairing[lower..].reverse();
        }
        CoupleStyle::TailBlockShuffle { seed } => {
            let mut rng = rng_for(seed, 0);
            pairing[..lower].shuffle(&mut rng);
            pairing[lower..].shuffle(&mut rng);
        }
    }
    let rows = (0..m).map(|j| vec![xs[j], ys[pairing[j]]]).collect();
    ScenarioSet::new(rows, vec![1.0 / m as f64; m], vec!["X".into(), "Y".into()])
}

/// One record of the collapse iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CollapseStep {
    pub iteration: usize,
    pub es: f64,
    pub lower_es: f64,
    pub mean: f64,
    pub upper_width: f64,
    pub lower_width: f64,
}

/// Result of [`collapse`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Collapse {
    pub level: f64,
    pub eps: f64,
    pub terminal: DiscreteDistribution,
    /// `{ES_p w.p. 1 − p, ES⁻_p w.p. p}`, the limit of the iteration.
    pub target: DiscreteDistribution,
    pub iterations: usize,
    pub trace: Vec<CollapseStep>,
}

/// Hard stop for the collapse loop; the width halves every step so this is
/// never reached for finite inputs.
const MAX_COLLAPSE_STEPS: usize = 2048;

/// Repeatedly applies the midpoint transform to the upper and lower
/// conditional laws at level `p` until both are narrower than `eps`.
///
/// `ES_p`, `ES⁻_p` and the mean of `(1 − p)·G + p·H` are unchanged by each
/// step, and the iterate approaches the two-point law of the target.
pub fn collapse(d: &DiscreteDistribution, p: f64, eps: f64) -> Result<Collapse> {
    check_level(p)?;
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Domain {
            what: "eps",
            value: eps,
            expected: "(0, ∞)",
        });
    }
    let mut upper = d.restrict(p, 1.0)?;
    let mut lower = d.restrict(0.0, p)?;
    let es = risk::es(d, p)?;
    let les = risk::lower_es(d, p)?;
    let target = DiscreteDistribution::from_pieces(vec![(es, 1.0 - p), (les, p)]);

    let mut trace = Vec::new();
    let mut record = |n: usize, g: &DiscreteDistribution, h: &DiscreteDistribution| -> Result<()> {
        let z = DiscreteDistribution::mixture(&[(1.0 - p, g), (p, h)])?;
        trace.push(CollapseStep {
            iteration: n,
            es: risk::es(&z, p)?,
            lower_es: risk::lower_es(&z, p)?,
            mean: z.mean(),
            upper_width: g.range_width(),
            lower_width: h.range_width(),
        });
        Ok(())
    };
    record(0, &upper, &lower)?;
    let mut n = 0;
    while upper.range_width() >= eps || lower.range_width() >= eps {
        if n == MAX_COLLAPSE_STEPS {
            return Err(Error::Solver(format!(
                "collapse did not reach width {eps} in {n} steps"
            )));
        }
        upper = upper.t_transform();
        lower = lower.t_transform();
        n += 1;
        record(n, &upper, &lower)?;
    }
    let terminal = DiscreteDistribution::mixture(&[(1.0 - p, &upper), (p, &lower)])?;
    Ok(Collapse {
        level: p,
        eps,
        terminal,
        target,
        iterations: n,
        trace,
    })
}

/// `ceil(log2(L/eps)) + 1`, the iteration bound for [`collapse`].
pub fn collapse_bound(d: &DiscreteDistribution, eps: f64) -> usize {
    let l = d.range_width();
    if l < eps {
        return 1;
    }
    (l / eps).log2().ceil().max(0.0) as usize + 1
}
