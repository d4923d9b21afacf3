//! Scenario-based mean-ES portfolio selection.
//!
//! ES of the portfolio loss `aᵀX` is linearized through its minimization
//! form: with auxiliary `t` and excess variables `z_s >= aᵀx_s − t`,
//! `z_s >= 0`, the quantity `t + Σ w_s z_s / (1 − p)` is at least ES and
//! equals it at the optimum.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::concentration::ScenarioSet;
use crate::error::{check_level, Error, Result};
use crate::lp::{LinearProgram, LpStatus, Relation};
use crate::risk::{self, axiom_harness, Axiom, Functional, HarnessReport};

/// Admissible position weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FeasibleSet {
    /// `a >= 0`, `Σ a = 1`.
    Simplex,
    /// `lo <= a <= hi`, optionally with `Σ a = budget`.
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
        #[serde(default)]
        budget: Option<f64>,
    },
    /// `G a <= h` with `a` otherwise free.
    Linear { g: Vec<Vec<f64>>, h: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "target", rename_all = "snake_case")]
pub enum Mode {
    /// Maximize expected return subject to `ES_p <= r`.
    MaxReturnGivenEs(f64),
    /// Minimize `ES_p` subject to expected return `>= u`.
    MinEsGivenReturn(f64),
}

/// Columns of `scenarios` are asset losses; the return of `a` is `E[−aᵀX]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioProblem {
    pub scenarios: ScenarioSet,
    pub p: f64,
    pub feasible_set: FeasibleSet,
    pub mode: Mode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Allocation {
    pub weights: Vec<f64>,
    /// ES of the portfolio loss, recomputed from the scenarios.
    pub es_value: f64,
    pub mean_return: f64,
    /// Optimal value of the linear program in its own sense (ES bound or
    /// expected return).
    pub lp_objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PortfolioOutcome {
    pub status: Status,
    pub allocation: Option<Allocation>,
}

impl PortfolioProblem {
    pub fn new(scenarios: ScenarioSet, p: f64, feasible_set: FeasibleSet, mode: Mode) -> Result<Self> {
        check_level(p)?;
        let k = scenarios.k();
        match &feasible_set {
            FeasibleSet::Simplex => {}
            FeasibleSet::Box { lo, hi, .. } => {
                for v in [lo, hi] {
                    if v.len() != k {
                        return Err(Error::Dimension {
                            expected: k,
                            got: v.len(),
                            context: "box bounds",
                        });
                    }
                }
                if lo.iter().zip(hi).any(|(l, h)| !(l.is_finite() && h.is_finite() && l <= h)) {
                    return Err(Error::Scenarios("box bounds must be finite with lo <= hi".into()));
                }
            }
            FeasibleSet::Linear { g, h } => {
                if g.len() != h.len() {
                    return Err(Error::Dimension {
                        expected: g.len(),
                        got: h.len(),
                        context: "constraint right-hand side",
                    });
                }
                if let Some(row) = g.iter().find(|r| r.len() != k) {
                    return Err(Error::Dimension {
                        expected: k,
                        got: row.len(),
                        context: "constraint row",
                    });
                }
            }
        }
        Ok(Self {
            scenarios,
            p,
            feasible_set,
            mode,
        })
    }

    pub fn with_mode(&self, mode: Mode) -> Self {
        Self {
            mode,
            ..self.clone()
        }
    }

    /// `E[−X_i]` for each asset.
    pub fn expected_returns(&self) -> Vec<f64> {
        let s = &self.scenarios;
        (0..s.k())
            .map(|i| -s.column(i).iter().zip(s.weights()).map(|(x, w)| x * w).sum::<f64>())
            .collect()
    }
}

// Maps asset weights to nonnegative LP columns: `a_i = shift_i + x_pos − x_neg`.
struct Encoding {
    shift: Vec<f64>,
    pos: Vec<usize>,
    neg: Vec<Option<usize>>,
    t: Option<(usize, usize)>,
    z: usize,
    n: usize,
}

impl Encoding {
    fn new(k: usize, fs: &FeasibleSet, with_es: bool, m: usize) -> Self {
        let free = matches!(fs, FeasibleSet::Linear { .. });
        let shift = match fs {
            FeasibleSet::Box { lo, .. } => lo.clone(),
            _ => vec![0.0; k],
        };
        let mut n = 0;
        let mut pos = Vec::with_capacity(k);
        let mut neg = Vec::with_capacity(k);
        for _ in 0..k {
            pos.push(n);
            n += 1;
            if free {
                neg.push(Some(n));
                n += 1;
            } else {
                neg.push(None);
            }
        }
        let t = with_es.then(|| {
            n += 2;
            (n - 2, n - 1)
        });
        let z = n;
        if with_es {
            n += m;
        }
        Self {
            shift,
            pos,
            neg,
            t,
            z,
            n,
        }
    }

    // Adds `coef·a_i` to `row` and returns the constant `coef·shift_i`.
    fn put_a(&self, row: &mut [f64], i: usize, coef: f64) -> f64 {
        row[self.pos[i]] += coef;
        if let Some(j) = self.neg[i] {
            row[j] -= coef;
        }
        coef * self.shift[i]
    }

    fn decode(&self, x: &[f64]) -> Vec<f64> {
        (0..self.pos.len())
            .map(|i| self.shift[i] + x[self.pos[i]] - self.neg[i].map_or(0.0, |j| x[j]))
            .collect()
    }
}

// Feasible-set rows over the weight columns.
fn feasible_rows(lp: &mut LinearProgram, enc: &Encoding, fs: &FeasibleSet, k: usize) {
    let sum_row = |lp: &mut LinearProgram, total: f64| {
        let mut row = vec![0.0; enc.n];
        let c: f64 = (0..k).map(|i| enc.put_a(&mut row, i, 1.0)).sum();
        lp.add(row, Relation::Eq, total - c);
    };
    match fs {
        FeasibleSet::Simplex => sum_row(lp, 1.0),
        FeasibleSet::Box { lo, hi, budget } => {
            for i in 0..k {
                let mut row = vec![0.0; enc.n];
                row[enc.pos[i]] = 1.0;
                lp.add(row, Relation::Le, hi[i] - lo[i]);
            }
            if let Some(b) = budget {
                sum_row(lp, *b);
            }
        }
        FeasibleSet::Linear { g, h } => {
            for (gr, &hv) in g.iter().zip(h) {
                let mut row = vec![0.0; enc.n];
                let c: f64 = (0..k).map(|i| enc.put_a(&mut row, i, gr[i])).sum();
                lp.add(row, Relation::Le, hv - c);
            }
        }
    }
}

// Rows `z_s − aᵀx_s + t >= 0`; returns the ES bound row
// `t + Σ w_s z_s / (1 − p)`.
fn es_rows(lp: &mut LinearProgram, enc: &Encoding, prob: &PortfolioProblem) -> Vec<f64> {
    let s = &prob.scenarios;
    let (tp, tn) = enc.t.expect("ES columns present");
    for (sc, row_x) in s.losses().iter().enumerate() {
        let mut row = vec![0.0; enc.n];
        row[enc.z + sc] = 1.0;
        row[tp] = 1.0;
        row[tn] = -1.0;
        let c: f64 = (0..s.k()).map(|i| enc.put_a(&mut row, i, -row_x[i])).sum();
        lp.add(row, Relation::Ge, -c);
    }
    let mut bound = vec![0.0; enc.n];
    bound[tp] = 1.0;
    bound[tn] = -1.0;
    for (sc, w) in s.weights().iter().enumerate() {
        bound[enc.z + sc] = w / (1.0 - prob.p);
    }
    bound
}

// Return row `Σ a_i μ_i` with its constant.
fn return_row(enc: &Encoding, mu: &[f64]) -> (Vec<f64>, f64) {
    let mut row = vec![0.0; enc.n];
    let c = mu.iter().enumerate().map(|(i, &m)| enc.put_a(&mut row, i, m)).sum();
    (row, c)
}

fn status_of(s: LpStatus) -> Status {
    match s {
        LpStatus::Optimal => Status::Optimal,
        LpStatus::Infeasible => Status::Infeasible,
        LpStatus::Unbounded => Status::Unbounded,
    }
}

/// Solves the mean-ES problem as a linear program.
///
/// Infeasible and unbounded problems are reported through the status; only
/// solver breakdowns are errors.
pub fn solve(prob: &PortfolioProblem) -> Result<PortfolioOutcome> {
    let s = &prob.scenarios;
    let k = s.k();
    let enc = Encoding::new(k, &prob.feasible_set, true, s.m());
    let mu = prob.expected_returns();
    let (ret, ret_c) = return_row(&enc, &mu);

    let mut lp = LinearProgram::new(vec![0.0; enc.n]);
    feasible_rows(&mut lp, &enc, &prob.feasible_set, k);
    let bound = es_rows(&mut lp, &enc, prob);
    let sign = match prob.mode {
        Mode::MinEsGivenReturn(u) => {
            lp.add(ret, Relation::Ge, u - ret_c);
            lp.objective = bound;
            1.0
        }
        Mode::MaxReturnGivenEs(r) => {
            lp.add(bound, Relation::Le, r);
            lp.objective = ret.iter().map(|v| -v).collect();
            -1.0
        }
    };
    let sol = lp.solve()?;
    let status = status_of(sol.status);
    if status != Status::Optimal {
        return Ok(PortfolioOutcome {
            status,
            allocation: None,
        });
    }
    let weights = enc.decode(&sol.x);
    let lp_objective = match prob.mode {
        Mode::MinEsGivenReturn(_) => sign * sol.objective,
        Mode::MaxReturnGivenEs(_) => sign * sol.objective + ret_c,
    };
    Ok(PortfolioOutcome {
        status,
        allocation: Some(evaluate(prob, weights, lp_objective)?),
    })
}

/// ES and expected return of fixed weights.
pub fn evaluate(prob: &PortfolioProblem, weights: Vec<f64>, lp_objective: f64) -> Result<Allocation> {
    let s = &prob.scenarios;
    let loss = s.combine(&weights)?;
    let law = s.law(&loss);
    Ok(Allocation {
        es_value: risk::es(&law, prob.p)?,
        mean_return: -law.mean(),
        weights,
        lp_objective,
    })
}

/// Smallest and largest expected return over the feasible set.
pub fn return_range(prob: &PortfolioProblem) -> Result<Option<(f64, f64)>> {
    let k = prob.scenarios.k();
    let enc = Encoding::new(k, &prob.feasible_set, false, 0);
    let (ret, c) = return_row(&enc, &prob.expected_returns());
    let mut ends = [0.0; 2];
    for (end, sign) in ends.iter_mut().zip([1.0, -1.0]) {
        let mut lp = LinearProgram::new(ret.iter().map(|v| sign * v).collect());
        feasible_rows(&mut lp, &enc, &prob.feasible_set, k);
        let sol = lp.solve()?;
        match sol.status {
            LpStatus::Optimal => *end = sign * sol.objective + c,
            LpStatus::Infeasible => return Ok(None),
            LpStatus::Unbounded => {
                return Err(Error::Scenarios("feasible set is unbounded in return".into()))
            }
        }
    }
    Ok(Some((ends[0], ends[1])))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontierPoint {
    pub target: f64,
    pub status: Status,
    pub allocation: Option<Allocation>,
}

/// Minimum-ES portfolios for `n_points` return targets evenly spaced over the
/// attainable range. The mode of `prob` is ignored.
pub fn frontier(prob: &PortfolioProblem, n_points: usize) -> Result<Vec<FrontierPoint>> {
    if n_points < 2 {
        return Err(Error::Domain {
            what: "n_points",
            value: n_points as f64,
            expected: "[2, ∞)",
        });
    }
    let Some((lo, hi)) = return_range(prob)? else {
        return Ok(Vec::new());
    };
    let targets: Vec<f64> = (0..n_points)
        .map(|j| {
            if j + 1 == n_points {
                hi
            } else {
                lo + (hi - lo) * j as f64 / (n_points - 1) as f64
            }
        })
        .collect();
    // Back the top target off by rounding noise so it stays attainable.
    let slack = 1e-12 * lo.abs().max(hi.abs()).max(hi - lo);
    targets
        .into_par_iter()
        .enumerate()
        .map(|(j, u)| {
            let goal = if j + 1 == n_points { u - slack } else { u };
            let out = solve(&prob.with_mode(Mode::MinEsGivenReturn(goal)))?;
            Ok(FrontierPoint {
                target: u,
                status: out.status,
                allocation: out.allocation,
            })
        })
        .collect()
}

/// Result of testing an objective for the mean-ES characterization.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanEsReport {
    pub level: f64,
    pub monotonicity: HarnessReport,
    pub concentration_aversion: HarnessReport,
    /// Both harnesses passed. Evidence from finitely many trials, not proof.
    pub consistent: bool,
}

/// Runs the monotonicity and `p`-concentration-aversion harnesses on an
/// objective of the portfolio loss law.
pub fn objective_is_mean_es<F: Functional + ?Sized>(
    objective: &F,
    p: f64,
    trials: usize,
    seed: u64,
) -> Result<MeanEsReport> {
    check_level(p)?;
    let monotonicity = axiom_harness(objective, Axiom::Monotonicity, trials, seed)?;
    let concentration_aversion =
        axiom_harness(objective, Axiom::ConcentrationAversion { p }, trials, seed)?;
    Ok(MeanEsReport {
        level: p,
        consistent: monotonicity.passed() && concentration_aversion.passed(),
        monotonicity,
        concentration_aversion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::DiscreteDistribution;

    fn set(cols: &[Vec<f64>]) -> ScenarioSet {
        let m = cols[0].len();
        ScenarioSet::from_columns(cols, vec![1.0 / m as f64; m]).unwrap()
    }

    #[test]
    fn single_asset_is_forced() {
        let x = vec![3.0, -1.0, 0.5, 2.0];
        let prob = PortfolioProblem::new(
            set(std::slice::from_ref(&x)),
            0.5,
            FeasibleSet::Simplex,
            Mode::MinEsGivenReturn(-10.0),
        )
        .unwrap();
        let out = solve(&prob).unwrap();
        let a = out.allocation.unwrap();
        assert!((a.weights[0] - 1.0).abs() < 1e-12);
        let es = risk::es(&DiscreteDistribution::uniform(&x).unwrap(), 0.5).unwrap();
        assert!((a.es_value - es).abs() < 1e-12);
        assert!((a.lp_objective - es).abs() < 1e-8);
    }

    #[test]
    fn dominated_asset_is_dropped() {
        let x1 = vec![0.02, -0.01, 0.03, -0.04, 0.0];
        let x2: Vec<f64> = x1.iter().map(|v| v + 1.0).collect();
        let prob = PortfolioProblem::new(
            set(&[x1, x2]),
            0.6,
            FeasibleSet::Simplex,
            Mode::MinEsGivenReturn(-5.0),
        )
        .unwrap();
        let a = solve(&prob).unwrap().allocation.unwrap();
        assert!((a.weights[0] - 1.0).abs() < 1e-9 && a.weights[1].abs() < 1e-9);
    }

    #[test]
    fn infeasible_target_is_a_status() {
        let prob = PortfolioProblem::new(
            set(&[vec![1.0, 2.0], vec![0.0, 1.0]]),
            0.5,
            FeasibleSet::Simplex,
            Mode::MinEsGivenReturn(10.0),
        )
        .unwrap();
        let out = solve(&prob).unwrap();
        assert_eq!(out.status, Status::Infeasible);
        assert!(out.allocation.is_none());
    }

    #[test]
    fn max_return_respects_es_budget() {
        let prob = PortfolioProblem::new(
            set(&[vec![-0.05, 0.1, -0.02, 0.03], vec![0.01, 0.0, -0.01, 0.02]]),
            0.75,
            FeasibleSet::Simplex,
            Mode::MaxReturnGivenEs(0.03),
        )
        .unwrap();
        let a = solve(&prob).unwrap().allocation.unwrap();
        assert!(a.es_value <= 0.03 + 1e-9);
        assert!((a.lp_objective - a.mean_return).abs() < 1e-9);
    }

    #[test]
    fn box_and_linear_sets() {
        let s = set(&[vec![1.0, -1.0, 0.0, 2.0], vec![0.5, 0.5, -1.0, 0.0]]);
        let boxed = PortfolioProblem::new(
            s.clone(),
            0.5,
            FeasibleSet::Box {
                lo: vec![0.2, 0.1],
                hi: vec![0.7, 0.9],
                budget: Some(1.0),
            },
            Mode::MinEsGivenReturn(-10.0),
        )
        .unwrap();
        let a = solve(&boxed).unwrap().allocation.unwrap();
        assert!(a.weights[0] >= 0.2 - 1e-9 && a.weights[0] <= 0.7 + 1e-9);
        assert!((a.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);

        // The same simplex written as linear rows with free weights.
        let linear = PortfolioProblem::new(
            s.clone(),
            0.5,
            FeasibleSet::Linear {
                g: vec![vec![1.0, 1.0], vec![-1.0, -1.0], vec![-1.0, 0.0], vec![0.0, -1.0]],
                h: vec![1.0, -1.0, 0.0, 0.0],
            },
            Mode::MinEsGivenReturn(-10.0),
        )
        .unwrap();
        let simplex = PortfolioProblem {
            feasible_set: FeasibleSet::Simplex,
            ..linear.clone()
        };
        let l = solve(&linear).unwrap().allocation.unwrap();
        let sx = solve(&simplex).unwrap().allocation.unwrap();
        assert!((l.es_value - sx.es_value).abs() < 1e-9);
    }

    #[test]
    fn frontier_is_monotone_and_single_asset_is_flat() {
        let s = set(&[vec![0.03, -0.02, 0.01, -0.05], vec![0.06, -0.08, 0.02, 0.0]]);
        let prob = PortfolioProblem::new(s, 0.5, FeasibleSet::Simplex, Mode::MinEsGivenReturn(0.0)).unwrap();
        let f = frontier(&prob, 6).unwrap();
        assert_eq!(f.len(), 6);
        let es: Vec<f64> = f.iter().map(|p| p.allocation.as_ref().unwrap().es_value).collect();
        assert!(es.windows(2).all(|w| w[1] >= w[0] - 1e-9), "{es:?}");

        let one = PortfolioProblem::new(
            set(&[vec![1.0, 2.0, 3.0]]),
            0.5,
            FeasibleSet::Simplex,
            Mode::MinEsGivenReturn(0.0),
        )
        .unwrap();
        let f = frontier(&one, 3).unwrap();
        assert!(f.windows(2).all(|w| w[0].allocation == w[1].allocation));
    }

    #[test]
    fn mean_es_tester() {
        let p = 0.9;
        let u = -0.5;
        let constrained = move |d: &DiscreteDistribution| {
            if -d.mean() >= u {
                risk::es(d, p).unwrap()
            } else {
                f64::INFINITY
            }
        };
        assert!(objective_is_mean_es(&constrained, p, 300, 4).unwrap().consistent);

        let variance = |d: &DiscreteDistribution| d.variance();
        let r = objective_is_mean_es(&variance, p, 300, 4).unwrap();
        assert!(!r.monotonicity.passed());

        let median = |d: &DiscreteDistribution| risk::var(d, 0.5).unwrap();
        let r = objective_is_mean_es(&median, p, 2000, 4).unwrap();
        assert!(!r.concentration_aversion.passed());
    }
}
