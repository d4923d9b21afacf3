//! Expected Shortfall, tail-event concentration, mean-ES portfolio selection
//! and checkerboard-copula diagnostics on finite scenario sets.
//!
//! ```
//! use concentra::{risk, DiscreteDistribution};
//!
//! let d = DiscreteDistribution::uniform(&[1., 2., 3., 4., 5., 6., 7., 8., 9., 10.]).unwrap();
//! assert_eq!(risk::var(&d, 0.8).unwrap(), 8.0);
//! assert!((risk::es(&d, 0.8).unwrap() - 9.5).abs() < 1e-12);
//! ```

pub mod concentration;
pub mod copula;
pub mod dist;
pub mod error;
pub mod fmt;
pub mod lp;
pub mod portfolio;
pub mod risk;
pub mod sampling;

pub use concentration::{
    collapse, couple, es_additivity_test, find_common_tail_event, Collapse, CoupleStyle,
    ScenarioSet, TailCertificate, TailVerdict,
};
pub use copula::{
    concordance_leq, mix, Band, ChainDiagnostics, CheckerboardCopula, LlnConfig, Verdict,
};
pub use dist::{Atom, DiscreteDistribution};
pub use error::{Error, Result};
pub use portfolio::{
    frontier, objective_is_mean_es, solve, FeasibleSet, Mode, PortfolioOutcome, PortfolioProblem,
    Status,
};
pub use risk::{axiom_harness, Axiom, Functional, HarnessReport, ProbeGrid, RiskFunctional};
