//! Value-at-Risk, Expected Shortfall and the functionals built from them.
//!
//! Every measure here is law invariant and is evaluated on a
//! [`DiscreteDistribution`]. ES and lower ES integrate the step quantile
//! function exactly, splitting the atom that straddles the level.

mod functional;
pub mod harness;

pub use functional::{evaluate, FHandle, Functional, GHandle, ProbeGrid, RiskFunctional};
pub use harness::{axiom_harness, Axiom, Counterexample, HarnessReport, HarnessResult};

use serde::Serialize;

use crate::dist::DiscreteDistribution;
use crate::error::{check_level, Result};

/// `VaR_p`: the left `p`-quantile.
pub fn var(d: &DiscreteDistribution, p: f64) -> Result<f64> {
    d.quantile(p)
}

/// `ES_p = (1/(1−p)) ∫_p^1 VaR_s ds`.
pub fn es(d: &DiscreteDistribution, p: f64) -> Result<f64> {
    check_level(p)?;
    Ok(d.quantile_integral(p, 1.0) / (1.0 - p))
}

/// Lower ES: `(1/p) ∫_0^p VaR_s ds`.
///
/// Satisfies `p·lower_es + (1−p)·es = mean`.
pub fn lower_es(d: &DiscreteDistribution, p: f64) -> Result<f64> {
    check_level(p)?;
    Ok(d.quantile_integral(0.0, p) / p)
}

/// Result of the minimization form of ES.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RuMinimum {
    pub value: f64,
    pub minimizer: f64,
}

/// Value of `t + E[(Z − t)_+] / (1 − p)`.
pub fn ru_objective(d: &DiscreteDistribution, p: f64, t: f64) -> f64 {
    let excess: f64 = d.atoms().map(|a| a.prob * (a.value - t).max(0.0)).sum();
    t + excess / (1.0 - p)
}

/// ES through `min_t { t + E[(Z − t)_+] / (1 − p) }`.
///
/// The objective is convex and piecewise linear with kinks at the atoms, so
/// the minimum is found by scanning atom values. The reported minimizer is
/// `VaR_p`, which always attains it.
pub fn es_ru(d: &DiscreteDistribution, p: f64) -> Result<RuMinimum> {
    check_level(p)?;
    let value = d
        .values()
        .iter()
        .map(|&t| ru_objective(d, p, t))
        .fold(f64::INFINITY, f64::min);
    Ok(RuMinimum {
        value,
        minimizer: d.quantile(p)?,
    })
}

/// Summary row used by reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiskSummary {
    pub var: f64,
    pub es: f64,
    pub lower_es: f64,
    pub mean: f64,
}

pub fn summarize(d: &DiscreteDistribution, p: f64) -> Result<RiskSummary> {
    Ok(RiskSummary {
        var: var(d, p)?,
        es: es(d, p)?,
        lower_es: lower_es(d, p)?,
        mean: d.mean(),
    })
}
