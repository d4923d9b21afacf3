use std::io::Write;
use std::path::Path;

use concentra::concentration::{collapse_bound, es_gap, TailVerdict};
use concentra::copula::{Band, ChainDiagnostics, CheckerboardCopula, LlnConfig, Verdict};
use concentra::fmt::{g12, to_report_json};
use concentra::portfolio::{self, FeasibleSet, FrontierPoint, Mode, PortfolioOutcome, PortfolioProblem, Status};
use concentra::risk::{self, RiskFunctional, RiskSummary};
use concentra::{concordance_leq, DiscreteDistribution, ScenarioSet};
use serde::Serialize;

use crate::config::RunConfig;
use crate::{CliError, Outcome};

/// Report schema version written into every JSON report.
const SCHEMA: u32 = 1;

const DEFAULT_TOL: f64 = 1e-10;
const DEFAULT_EPS: f64 = 1e-6;
const DEFAULT_POINTS: usize = 11;
const DEFAULT_LENGTH: usize = 10_000;
const DEFAULT_REPLICATIONS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum BandArg {
    Iid,
    BatchMeans,
}

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    command: &'a str,
    schema: u32,
    /// Library operations invoked to produce the report.
    operations: &'a [&'a str],
    #[serde(flatten)]
    body: T,
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn emit_report<T: Serialize>(
    command: &str,
    operations: &[&str],
    body: T,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let report = Report {
        command,
        schema: SCHEMA,
        operations,
        body,
    };
    emit(&to_report_json(&report)?, out)
}

fn read_scenarios(path: &Path) -> Result<ScenarioSet, CliError> {
    ScenarioSet::from_csv_path(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn read_copula(path: &Path) -> Result<CheckerboardCopula, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn parse_measure(spec: &str, p: f64) -> Result<RiskFunctional, CliError> {
    let rf = match spec.split_once(':') {
        Some(("mix", alpha)) => {
            let alpha: f64 = alpha
                .parse()
                .map_err(|_| CliError::Input(format!("measure {spec:?}: bad weight")))?;
            RiskFunctional::coherent_mix(p, alpha)?
        }
        None => match spec {
            "var" => RiskFunctional::var(p)?,
            "es" => RiskFunctional::es(p)?,
            "lower_es" => RiskFunctional::lower_es(p)?,
            "mean" => RiskFunctional::mean(),
            _ => return Err(CliError::Input(format!("unknown measure {spec:?}"))),
        },
        Some(_) => return Err(CliError::Input(format!("unknown measure {spec:?}"))),
    };
    Ok(rf)
}

#[derive(Serialize)]
struct PositionRow {
    label: String,
    #[serde(flatten)]
    summary: RiskSummary,
}

#[derive(Serialize)]
struct MeasureValue {
    spec: String,
    label: String,
    value: f64,
}

#[derive(Serialize)]
struct RiskBody {
    level: f64,
    scenarios: usize,
    equal_weights_assumed: bool,
    positions: Vec<PositionRow>,
    total: RiskSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    measure: Option<MeasureValue>,
}

fn risk_text(body: &RiskBody) -> String {
    let mut rows: Vec<[String; 5]> = vec![[
        "position".into(),
        "VaR".into(),
        "ES".into(),
        "lower ES".into(),
        "mean".into(),
    ]];
    let cells = |label: &str, s: &RiskSummary| {
        [label.to_string(), g12(s.var), g12(s.es), g12(s.lower_es), g12(s.mean)]
    };
    for r in &body.positions {
        rows.push(cells(&r.label, &r.summary));
    }
    rows.push(cells("total", &body.total));
    let widths: Vec<usize> = (0..5).map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0)).collect();
    let mut out = format!("level {}, {} scenarios", g12(body.level), body.scenarios);
    if body.equal_weights_assumed {
        out.push_str(", equal weights assumed");
    }
    out.push('\n');
    for r in &rows {
        let mut line = format!("{:<w$}", r[0], w = widths[0]);
        for c in 1..5 {
            line.push_str(&format!("  {:>w$}", r[c], w = widths[c]));
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    if let Some(m) = &body.measure {
        out.push_str(&format!("{} of total: {}\n", m.label, g12(m.value)));
    }
    out
}

pub fn risk(
    cfg: &RunConfig,
    path: &Path,
    measure: Option<String>,
    format: Format,
    out: Option<&Path>,
) -> Result<Outcome, CliError> {
    let p = cfg.level()?;
    let s = read_scenarios(path)?;
    let positions = (0..s.k())
        .map(|i| {
            Ok(PositionRow {
                label: s.labels()[i].clone(),
                summary: risk::summarize(&s.marginal(i), p)?,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let total_law = s.law(&s.total());
    let measure = match measure.or_else(|| cfg.measure.clone()) {
        Some(spec) => {
            let rf = parse_measure(&spec, p)?;
            Some(MeasureValue {
                label: rf.label(),
                value: rf.evaluate(&total_law),
                spec,
            })
        }
        None => None,
    };
    let body = RiskBody {
        level: p,
        scenarios: s.m(),
        equal_weights_assumed: s.equal_weights_assumed(),
        positions,
        total: risk::summarize(&total_law, p)?,
        measure,
    };
    match format {
        Format::Json => emit_report("risk", &["var", "es", "lower_es", "evaluate"], body, out)?,
        Format::Text => emit(&risk_text(&body), out)?,
    }
    Ok(Outcome::Positive)
}

#[derive(Serialize)]
struct ConcentrationBody {
    level: f64,
    tol: f64,
    equal_weights_assumed: bool,
    tail_event: TailVerdict,
    es_positions: Vec<f64>,
    es_sum: f64,
    gap: f64,
    additive: bool,
}

pub fn concentration(
    cfg: &RunConfig,
    path: &Path,
    tol: Option<f64>,
    out: Option<&Path>,
) -> Result<Outcome, CliError> {
    let p = cfg.level()?;
    let tol = RunConfig::positive("tol", tol.or(cfg.tol).unwrap_or(DEFAULT_TOL))?;
    let s = read_scenarios(path)?;
    let verdict = concentra::find_common_tail_event(&s, p)?;
    let es_positions = (0..s.k())
        .map(|i| risk::es(&s.marginal(i), p))
        .collect::<concentra::Result<Vec<f64>>>()?;
    let outcome = if verdict.is_certificate() {
        Outcome::Positive
    } else {
        Outcome::Negative
    };
    let body = ConcentrationBody {
        level: p,
        tol,
        equal_weights_assumed: s.equal_weights_assumed(),
        tail_event: verdict,
        es_sum: risk::es(&s.law(&s.total()), p)?,
        gap: es_gap(&s, p)?,
        additive: concentra::es_additivity_test(&s, p, tol)?,
        es_positions,
    };
    emit_report(
        "concentration",
        &["find_common_tail_event", "es_additivity_test"],
        body,
        out,
    )?;
    Ok(outcome)
}

#[derive(Serialize)]
struct FrontierBody<'a> {
    level: f64,
    feasible_set: &'a FeasibleSet,
    return_range: Option<(f64, f64)>,
    points: usize,
    optimal_points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    mode: Option<Mode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    solution: Option<PortfolioOutcome>,
}

fn frontier_csv(points: &[FrontierPoint], k: usize) -> String {
    let mut out = String::from("target,es,mean");
    for i in 1..=k {
        out.push_str(&format!(",w_{i}"));
    }
    out.push('\n');
    for pt in points {
        let Some(a) = &pt.allocation else { continue };
        out.push_str(&format!("{},{},{}", g12(pt.target), g12(a.es_value), g12(a.mean_return)));
        for w in &a.weights {
            out.push(',');
            out.push_str(&g12(*w));
        }
        out.push('\n');
    }
    out
}

pub fn frontier(
    cfg: &RunConfig,
    path: &Path,
    n_points: Option<usize>,
    summary: Option<&Path>,
    out: Option<&Path>,
) -> Result<Outcome, CliError> {
    let p = cfg.level()?;
    let s = read_scenarios(path)?;
    let k = s.k();
    let n_points = n_points.or(cfg.n_points).unwrap_or(DEFAULT_POINTS);
    let feasible_set = cfg.constraints.clone().unwrap_or(FeasibleSet::Simplex);
    let prob = PortfolioProblem::new(
        s,
        p,
        feasible_set,
        cfg.mode.unwrap_or(Mode::MinEsGivenReturn(f64::NEG_INFINITY)),
    )?;
    let points = portfolio::frontier(&prob, n_points)?;
    emit(&frontier_csv(&points, k), out)?;
    let optimal = points.iter().filter(|pt| pt.status == Status::Optimal).count();
    if let Some(path) = summary {
        let solution = match cfg.mode {
            Some(_) => Some(portfolio::solve(&prob)?),
            None => None,
        };
        let body = FrontierBody {
            level: p,
            feasible_set: &prob.feasible_set,
            return_range: portfolio::return_range(&prob)?,
            points: points.len(),
            optimal_points: optimal,
            mode: cfg.mode,
            solution,
        };
        emit_report("frontier", &["frontier", "solve"], body, Some(path))?;
    }
    Ok(if optimal > 0 {
        Outcome::Positive
    } else {
        Outcome::Negative
    })
}

#[derive(Serialize)]
struct LevelCheck {
    p: f64,
    c_pp: f64,
    in_dp: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    tail_curves: Option<(f64, f64)>,
}

#[derive(Serialize)]
struct CheckDpBody {
    n: usize,
    levels: Vec<LevelCheck>,
}

fn level_check(c: &CheckerboardCopula, p: f64) -> Result<LevelCheck, CliError> {
    Ok(LevelCheck {
        p,
        c_pp: c.eval_c(p, p)?,
        in_dp: c.in_dp(p)?,
        tail_curves: c.tail_curves(p).ok(),
    })
}

pub fn check_dp(cfg: &RunConfig, path: &Path, out: Option<&Path>) -> Result<Outcome, CliError> {
    let c = read_copula(path)?;
    let n = c.n();
    let (levels, outcome) = match cfg.p {
        Some(_) => {
            let check = level_check(&c, cfg.level()?)?;
            let outcome = if check.in_dp {
                Outcome::Positive
            } else {
                Outcome::Negative
            };
            (vec![check], outcome)
        }
        None => (
            (1..n)
                .map(|k| level_check(&c, k as f64 / n as f64))
                .collect::<Result<Vec<_>, _>>()?,
            Outcome::Positive,
        ),
    };
    emit_report("copula check-dp", &["in_dp", "tail_curves"], CheckDpBody { n, levels }, out)?;
    Ok(outcome)
}

#[derive(Serialize)]
struct DensifyBody {
    n: usize,
    strict_interior: bool,
    dominates_input: bool,
    b_region_cells: usize,
    b_region_filled: bool,
    min_mass_on_b_region: f64,
    margin_error: f64,
}

pub fn densify(path: &Path, copula_out: Option<&Path>, out: Option<&Path>) -> Result<Outcome, CliError> {
    let c = read_copula(path)?;
    let d = c.densify();
    let region = c.b_region();
    let min_mass = region
        .iter()
        .map(|&(i, j)| d.at(i, j))
        .fold(f64::INFINITY, f64::min);
    if let Some(path) = copula_out {
        emit(&(serde_json::to_string(&d)? + "\n"), Some(path))?;
    }
    let body = DensifyBody {
        n: d.n(),
        strict_interior: c.is_strict_interior(),
        dominates_input: concordance_leq(&c, &d),
        b_region_cells: region.len(),
        b_region_filled: d.fills_b_region(&region),
        min_mass_on_b_region: if region.is_empty() { 0.0 } else { min_mass },
        margin_error: d.margin_error(),
    };
    emit_report(
        "copula densify",
        &["densify", "concordance_leq", "b_region"],
        body,
        out,
    )?;
    Ok(Outcome::Positive)
}

pub struct SimulateArgs {
    pub length: Option<usize>,
    pub replications: Option<usize>,
    pub band: Option<BandArg>,
}

#[derive(Serialize)]
struct SimulateBody<'a> {
    n: usize,
    seed: u64,
    #[serde(flatten)]
    diagnostics: &'a ChainDiagnostics,
}

pub fn simulate(
    cfg: &RunConfig,
    path: &Path,
    args: SimulateArgs,
    partial_means: Option<&Path>,
    out: Option<&Path>,
) -> Result<Outcome, CliError> {
    let c = read_copula(path)?;
    let seed = cfg.seed.unwrap_or(0);
    let mut lln = LlnConfig::new(
        args.length.or(cfg.length).unwrap_or(DEFAULT_LENGTH),
        args.replications.or(cfg.replications).unwrap_or(DEFAULT_REPLICATIONS),
        seed,
    );
    if cfg.p.is_some() {
        lln = lln.with_level(cfg.level()?);
    }
    lln.band = match args.band {
        Some(BandArg::Iid) => Band::Iid,
        Some(BandArg::BatchMeans) => Band::BatchMeans,
        None => cfg.band.unwrap_or(lln.band),
    };
    if let Some(v) = cfg.band_sigmas {
        lln.band_sigmas = RunConfig::positive("band_sigmas", v)?;
    }
    if let Some(v) = cfg.floor {
        lln.floor = RunConfig::positive("floor", v)?;
    }
    let diag = c.lln_diagnostic(&lln)?;
    if let Some(path) = partial_means {
        emit(&diag.partial_means_csv(), Some(path))?;
    }
    let body = SimulateBody {
        n: c.n(),
        seed,
        diagnostics: &diag,
    };
    emit_report("copula simulate", &["markov_chain", "lln_diagnostic"], body, out)?;
    Ok(match diag.verdict {
        Verdict::NonDiversifiable => Outcome::Negative,
        Verdict::Diversifiable | Verdict::Inconclusive => Outcome::Positive,
    })
}

#[derive(Serialize)]
struct CollapseBody {
    bound: usize,
    #[serde(flatten)]
    collapse: concentra::Collapse,
}

pub fn collapse(cfg: &RunConfig, path: &Path, out: Option<&Path>) -> Result<Outcome, CliError> {
    let p = cfg.level()?;
    let eps = RunConfig::positive("eps", cfg.eps.unwrap_or(DEFAULT_EPS))?;
    let d = DiscreteDistribution::from_csv_path(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let body = CollapseBody {
        bound: collapse_bound(&d, eps),
        collapse: concentra::collapse(&d, p, eps)?,
    };
    emit_report("collapse", &["collapse", "t_transform", "es", "lower_es"], body, out)?;
    Ok(Outcome::Positive)
}
