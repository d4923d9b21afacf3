//! Dense two-phase simplex for small linear programs.
//!
//! Problems are stated as `minimize cᵀx` subject to rows `aᵀx (<=|=|>=) b`
//! and `x >= 0`. Pivoting follows Bland's rule, so the method terminates
//! without cycling; the iteration cap only guards against numerical trouble.

use serde::Serialize;

use crate::error::{Error, Result};

/// Pivot and feasibility tolerance.
pub const PIVOT_EPS: f64 = 1e-9;

const MAX_PIVOTS: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal point; empty unless optimal.
    pub x: Vec<f64>,
    pub objective: f64,
}

/// `minimize cᵀx` over `x >= 0` and the listed constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>) -> Self {
        Self {
            objective,
            constraints: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.objective.len()
    }

    pub fn add(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> &mut Self {
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
        self
    }

    pub fn solve(&self) -> Result<LpSolution> {
        let n = self.n();
        for c in &self.constraints {
            if c.coeffs.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    got: c.coeffs.len(),
                    context: "constraint row",
                });
            }
        }
        Tableau::build(self).run(&self.objective)
    }
}

// Column layout: original variables, then one slack or surplus per
// inequality row, then one artificial per `>=` or `=` row; last column is
// the right-hand side.
struct Tableau {
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    n_orig: usize,
    n_struct: usize,
    n_cols: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let n = lp.n();
        let m = lp.constraints.len();
        // Flip rows so every right-hand side is nonnegative.
        let normalized: Vec<(Vec<f64>, Relation, f64)> = lp
            .constraints
            .iter()
            .map(|c| {
                if c.rhs < 0.0 {
                    let rel = match c.relation {
                        Relation::Le => Relation::Ge,
                        Relation::Ge => Relation::Le,
                        Relation::Eq => Relation::Eq,
                    };
                    (c.coeffs.iter().map(|v| -v).collect(), rel, -c.rhs)
                } else {
                    (c.coeffs.clone(), c.relation, c.rhs)
                }
            })
            .collect();
        let n_slack = normalized.iter().filter(|c| c.1 != Relation::Eq).count();
        let n_art = normalized.iter().filter(|c| c.1 != Relation::Le).count();
        let n_struct = n + n_slack;
        let n_cols = n_struct + n_art;

        let mut rows = vec![vec![0.0; n_cols + 1]; m];
        let mut basis = vec![0; m];
        let (mut slack, mut art) = (n, n_struct);
        for (r, (coeffs, rel, rhs)) in normalized.into_iter().enumerate() {
            rows[r][..n].copy_from_slice(&coeffs);
            rows[r][n_cols] = rhs;
            match rel {
                Relation::Le => {
                    rows[r][slack] = 1.0;
                    basis[r] = slack;
                    slack += 1;
                }
                Relation::Ge => {
                    rows[r][slack] = -1.0;
                    slack += 1;
                    rows[r][art] = 1.0;
                    basis[r] = art;
                    art += 1;
                }
                Relation::Eq => {
                    rows[r][art] = 1.0;
                    basis[r] = art;
                    art += 1;
                }
            }
        }
        Self {
            rows,
            basis,
            n_orig: n,
            n_struct,
            n_cols,
        }
    }

    fn run(mut self, c: &[f64]) -> Result<LpSolution> {
        if self.n_cols > self.n_struct {
            let mut phase1 = vec![0.0; self.n_cols];
            phase1[self.n_struct..].iter_mut().for_each(|v| *v = 1.0);
            let bounded = self.optimize(&phase1, self.n_cols)?;
            debug_assert!(bounded, "phase one is bounded below by zero");
            let infeas: f64 = self
                .basis
                .iter()
                .zip(&self.rows)
                .filter(|(&b, _)| b >= self.n_struct)
                .map(|(_, r)| r[self.n_cols])
                .sum();
            let scale = self
                .rows
                .iter()
                .map(|r| r[self.n_cols].abs())
                .fold(1.0, f64::max);
            if infeas > PIVOT_EPS * scale {
                return Ok(LpSolution {
                    status: LpStatus::Infeasible,
                    x: Vec::new(),
                    objective: f64::NAN,
                });
            }
            self.drive_out_artificials();
        }
        let mut cost = vec![0.0; self.n_struct];
        cost[..self.n_orig].copy_from_slice(c);
        if !self.optimize(&cost, self.n_struct)? {
            return Ok(LpSolution {
                status: LpStatus::Unbounded,
                x: Vec::new(),
                objective: f64::NEG_INFINITY,
            });
        }
        let mut x = vec![0.0; self.n_orig];
        for (r, &b) in self.basis.iter().enumerate() {
            if b < self.n_orig {
                x[b] = self.rows[r][self.n_cols].max(0.0);
            }
        }
        let objective = x.iter().zip(c).map(|(a, b)| a * b).sum();
        Ok(LpSolution {
            status: LpStatus::Optimal,
            x,
            objective,
        })
    }

    // Minimizes `cost` using only the first `allowed` columns as entering
    // candidates. Returns false if the objective is unbounded below.
    fn optimize(&mut self, cost: &[f64], allowed: usize) -> Result<bool> {
        let rhs = self.n_cols;
        for _ in 0..MAX_PIVOTS {
            // Reduced costs: c_j − c_Bᵀ B⁻¹ A_j, read off the current rows.
            let entering = (0..allowed).find(|&j| {
                if self.basis.contains(&j) {
                    return false;
                }
                let z: f64 = self
                    .basis
                    .iter()
                    .zip(&self.rows)
                    .map(|(&b, r)| cost.get(b).copied().unwrap_or(0.0) * r[j])
                    .sum();
                cost.get(j).copied().unwrap_or(0.0) - z < -PIVOT_EPS
            });
            let Some(j) = entering else {
                return Ok(true);
            };
            // Ratio test; ties go to the smallest basic index.
            let mut leave: Option<(usize, f64)> = None;
            for (r, row) in self.rows.iter().enumerate() {
                if row[j] > PIVOT_EPS {
                    let ratio = row[rhs] / row[j];
                    let better = match leave {
                        None => true,
                        Some((lr, best)) => {
                            ratio < best - PIVOT_EPS
                                || (ratio <= best + PIVOT_EPS && self.basis[r] < self.basis[lr])
                        }
                    };
                    if better {
                        leave = Some((r, ratio));
                    }
                }
            }
            let Some((r, _)) = leave else {
                return Ok(false);
            };
            self.pivot(r, j);
        }
        Err(Error::Solver(format!(
            "simplex did not converge within {MAX_PIVOTS} pivots"
        )))
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let piv = self.rows[r][j];
        self.rows[r].iter_mut().for_each(|v| *v /= piv);
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i != r {
                let f = row[j];
                if f != 0.0 {
                    row.iter_mut().zip(&pivot_row).for_each(|(v, p)| *v -= f * p);
                    row[j] = 0.0;
                }
            }
        }
        self.basis[r] = j;
    }

    // After phase one, artificials left in the basis sit at zero; pivot them
    // out or drop their rows when redundant.
    fn drive_out_artificials(&mut self) {
        let mut r = 0;
        while r < self.rows.len() {
            if self.basis[r] >= self.n_struct {
                let col = (0..self.n_struct)
                    .find(|&j| !self.basis.contains(&j) && self.rows[r][j].abs() > PIVOT_EPS);
                match col {
                    Some(j) => self.pivot(r, j),
                    None => {
                        self.rows.remove(r);
                        self.basis.remove(r);
                        continue;
                    }
                }
            }
            r += 1;
        }
        // Artificial columns are never re-entered.
        for row in &mut self.rows {
            row[self.n_struct..self.n_cols].iter_mut().for_each(|v| *v = 0.0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_maximization() {
        // max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18 → (2, 6), 36.
        let mut lp = LinearProgram::new(vec![-3.0, -5.0]);
        lp.add(vec![1.0, 0.0], Relation::Le, 4.0)
            .add(vec![0.0, 2.0], Relation::Le, 12.0)
            .add(vec![3.0, 2.0], Relation::Le, 18.0);
        let s = lp.solve().unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective + 36.0).abs() < 1e-12);
        assert!((s.x[0] - 2.0).abs() < 1e-12 && (s.x[1] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn equality_and_ge_rows() {
        // min x + 2y s.t. x + y = 1, x >= 0.25, y >= 0.25 → (0.75, 0.25).
        let mut lp = LinearProgram::new(vec![1.0, 2.0]);
        lp.add(vec![1.0, 1.0], Relation::Eq, 1.0)
            .add(vec![1.0, 0.0], Relation::Ge, 0.25)
            .add(vec![0.0, 1.0], Relation::Ge, 0.25);
        let s = lp.solve().unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.x[0] - 0.75).abs() < 1e-12);
        assert!((s.objective - 1.25).abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.add(vec![1.0], Relation::Le, 1.0).add(vec![1.0], Relation::Ge, 2.0);
        assert_eq!(lp.solve().unwrap().status, LpStatus::Infeasible);

        let mut lp = LinearProgram::new(vec![-1.0, 0.0]);
        lp.add(vec![1.0, -1.0], Relation::Le, 1.0);
        assert_eq!(lp.solve().unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn redundant_equalities_and_negative_rhs() {
        let mut lp = LinearProgram::new(vec![1.0, 1.0]);
        lp.add(vec![1.0, 1.0], Relation::Eq, 2.0)
            .add(vec![2.0, 2.0], Relation::Eq, 4.0)
            .add(vec![-1.0, 0.0], Relation::Le, -0.5);
        let s = lp.solve().unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 2.0).abs() < 1e-12);
        assert!(s.x[0] >= 0.5 - 1e-12);
    }

    #[test]
    fn degenerate_problem_terminates() {
        // Beale's cycling example; Bland's rule must terminate.
        let mut lp = LinearProgram::new(vec![-0.75, 150.0, -0.02, 6.0]);
        lp.add(vec![0.25, -60.0, -0.04, 9.0], Relation::Le, 0.0)
            .add(vec![0.5, -90.0, -0.02, 3.0], Relation::Le, 0.0)
            .add(vec![0.0, 0.0, 1.0, 0.0], Relation::Le, 1.0);
        let s = lp.solve().unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective + 0.05).abs() < 1e-12);
    }
}
