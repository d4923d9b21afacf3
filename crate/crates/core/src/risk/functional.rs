use std::fmt;
use std::sync::Arc;

use crate::dist::DiscreteDistribution;
use crate::error::{check_level, Error, Result};

/// Anything that maps a loss law to an extended real number.
///
/// Objectives may return `+∞` to encode a violated side constraint; the
/// axiom harness compares such values without subtracting them.
pub trait Functional: Send + Sync {
    fn value(&self, d: &DiscreteDistribution) -> f64;
}

impl<F> Functional for F
where
    F: Fn(&DiscreteDistribution) -> f64 + Send + Sync,
{
    fn value(&self, d: &DiscreteDistribution) -> f64 {
        self(d)
    }
}

pub type GHandle = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type FHandle = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Points on which a deviation transform `g` is certified.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeGrid {
    pub upper: f64,
    pub points: usize,
}

impl ProbeGrid {
    /// `points` evenly spaced on `[0, 2·range]`.
    pub fn for_range(range: f64) -> Self {
        Self {
            upper: 2.0 * range,
            points: 512,
        }
    }

    fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.points.max(2);
        (0..n).map(move |k| self.upper * k as f64 / (n - 1) as f64)
    }
}

impl Default for ProbeGrid {
    fn default() -> Self {
        Self::for_range(100.0)
    }
}

/// Relative slack of the Lipschitz and monotonicity certificates.
const CERT_TOL: f64 = 1e-9;

/// A law-invariant risk measure.
#[derive(Clone)]
pub enum RiskFunctional {
    Var { p: f64 },
    Es { p: f64 },
    LowerEs { p: f64 },
    /// `g(ES_p − E) + E`.
    GForm { p: f64, g: GHandle },
    /// `f(ES_p, E)` on the half-plane `x >= y`.
    FForm { p: f64, f: FHandle },
    Mean,
    /// `α·ES_p + (1 − α)·E`.
    CoherentMix { p: f64, alpha: f64 },
}

impl fmt::Debug for RiskFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl RiskFunctional {
    pub fn var(p: f64) -> Result<Self> {
        check_level(p)?;
        Ok(Self::Var { p })
    }

    pub fn es(p: f64) -> Result<Self> {
        check_level(p)?;
        Ok(Self::Es { p })
    }

    pub fn lower_es(p: f64) -> Result<Self> {
        check_level(p)?;
        Ok(Self::LowerEs { p })
    }

    pub fn mean() -> Self {
        Self::Mean
    }

    pub fn coherent_mix(p: f64, alpha: f64) -> Result<Self> {
        check_level(p)?;
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::Domain {
                what: "alpha",
                value: alpha,
                expected: "[0, 1]",
            });
        }
        Ok(Self::CoherentMix { p, alpha })
    }

    /// `g(ES_p − E) + E` after certifying on `grid` that `g(0) = 0`, `g` is
    /// nondecreasing and `g` is 1-Lipschitz.
    pub fn g_form<G>(p: f64, g: G, grid: ProbeGrid) -> Result<Self>
    where
        G: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        check_level(p)?;
        certify_g(&g, grid)?;
        Ok(Self::GForm { p, g: Arc::new(g) })
    }

    /// Skips certification. Used to plant invalid transforms in tests of the
    /// axiom harness.
    pub fn g_form_unchecked<G>(p: f64, g: G) -> Result<Self>
    where
        G: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        check_level(p)?;
        Ok(Self::GForm { p, g: Arc::new(g) })
    }

    pub fn f_form<F>(p: f64, f: F) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        check_level(p)?;
        Ok(Self::FForm { p, f: Arc::new(f) })
    }

    pub fn level(&self) -> Option<f64> {
        match *self {
            Self::Var { p }
            | Self::Es { p }
            | Self::LowerEs { p }
            | Self::GForm { p, .. }
            | Self::FForm { p, .. }
            | Self::CoherentMix { p, .. } => Some(p),
            Self::Mean => None,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Var { p } => format!("var({p})"),
            Self::Es { p } => format!("es({p})"),
            Self::LowerEs { p } => format!("lower_es({p})"),
            Self::GForm { p, .. } => format!("g_form({p})"),
            Self::FForm { p, .. } => format!("f_form({p})"),
            Self::Mean => "mean".into(),
            Self::CoherentMix { p, alpha } => format!("coherent_mix({p}, {alpha})"),
        }
    }

    pub fn evaluate(&self, d: &DiscreteDistribution) -> f64 {
        // Levels were validated at construction.
        let es = |p: f64| super::es(d, p).expect("validated level");
        match self {
            Self::Var { p } => super::var(d, *p).expect("validated level"),
            Self::Es { p } => es(*p),
            Self::LowerEs { p } => super::lower_es(d, *p).expect("validated level"),
            Self::GForm { p, g } => {
                let mean = d.mean();
                g((es(*p) - mean).max(0.0)) + mean
            }
            Self::FForm { p, f } => f(es(*p), d.mean()),
            Self::Mean => d.mean(),
            Self::CoherentMix { p, alpha } => alpha * es(*p) + (1.0 - alpha) * d.mean(),
        }
    }
}

impl Functional for RiskFunctional {
    fn value(&self, d: &DiscreteDistribution) -> f64 {
        self.evaluate(d)
    }
}

/// Free-function form of [`RiskFunctional::evaluate`].
pub fn evaluate(rf: &RiskFunctional, d: &DiscreteDistribution) -> f64 {
    rf.evaluate(d)
}

fn certify_g<G: Fn(f64) -> f64>(g: &G, grid: ProbeGrid) -> Result<()> {
    if !(grid.upper.is_finite() && grid.upper > 0.0) {
        return Err(Error::Functional(format!(
            "probe grid upper bound {} must be positive",
            grid.upper
        )));
    }
    let g0 = g(0.0);
    if g0.abs() > CERT_TOL {
        return Err(Error::Functional(format!("g(0) = {g0}, expected 0")));
    }
    let nodes: Vec<f64> = grid.nodes().collect();
    let vals: Vec<f64> = nodes.iter().map(|&x| g(x)).collect();
    if let Some(x) = nodes.iter().zip(&vals).find(|(_, v)| !v.is_finite()) {
        return Err(Error::Functional(format!("g({}) is not finite", x.0)));
    }
    // Consecutive checks suffice: Lipschitz bounds chain by the triangle
    // inequality and monotonicity by transitivity.
    for k in 1..nodes.len() {
        let gap = nodes[k] - nodes[k - 1];
        let rise = vals[k] - vals[k - 1];
        let scale = vals[k].abs().max(vals[k - 1].abs()).max(1.0);
        if rise < -CERT_TOL * scale {
            return Err(Error::Functional(format!(
                "g decreases on [{}, {}]",
                nodes[k - 1],
                nodes[k]
            )));
        }
        if rise.abs() > gap * (1.0 + CERT_TOL) + CERT_TOL * f64::EPSILON * scale {
            return Err(Error::Functional(format!(
                "g is not 1-Lipschitz on [{}, {}]: slope {}",
                nodes[k - 1],
                nodes[k],
                rise / gap
            )));
        }
    }
    Ok(())
}
