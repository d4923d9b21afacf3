//! Acceptance suite. Runs every criterion, prints one line each, and exits
//! non-zero if any fails or overruns its time budget.
//!
//! Set `UPDATE_GOLDEN=1` to rewrite the golden files of criterion 10.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use concentra::concentration::{collapse_bound, TailCertificate};
use concentra::portfolio::return_range;
use concentra::risk::{self, Axiom, ProbeGrid, RiskFunctional};
use concentra::sampling::{random_distribution, rng_for, PiecewiseLinear};
use concentra::{
    axiom_harness, collapse, concordance_leq, es_additivity_test, find_common_tail_event, solve,
    CheckerboardCopula, DiscreteDistribution, FeasibleSet, LlnConfig, Mode, PortfolioProblem,
    ScenarioSet, Status, Verdict,
};
use rand::Rng;
use rayon::prelude::*;

type Outcome = Result<String, String>;

/// Number, title, time budget in seconds, check.
type Criterion = (u32, &'static str, u64, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// Independent oracles: sort atoms and average the top (or bottom) mass.
fn tail_average(d: &DiscreteDistribution, mass: f64, from_top: bool) -> f64 {
    let mut atoms: Vec<(f64, f64)> = d.values().iter().copied().zip(d.probs().iter().copied()).collect();
    if from_top {
        atoms.reverse();
    }
    let (mut left, mut acc) = (mass, 0.0);
    for (v, w) in atoms {
        let take = w.min(left);
        acc += take * v;
        left -= take;
        if left <= 0.0 {
            break;
        }
    }
    acc / mass
}

fn oracle_es(d: &DiscreteDistribution, p: f64) -> f64 {
    tail_average(d, 1.0 - p, true)
}

fn oracle_lower_es(d: &DiscreteDistribution, p: f64) -> f64 {
    tail_average(d, p, false)
}

fn corpus(seed: u64, count: usize) -> Vec<DiscreteDistribution> {
    let mut rng = rng_for(seed, 0);
    (0..count)
        .map(|_| random_distribution(&mut rng, 50, -100.0, 100.0))
        .collect()
}

fn criterion_1() -> Outcome {
    let mut worst: f64 = 0.0;
    for d in corpus(1, 1000) {
        for p in [0.1, 0.5, 0.9, 0.975] {
            let es = risk::es(&d, p).map_err(|e| e.to_string())?;
            let les = risk::lower_es(&d, p).map_err(|e| e.to_string())?;
            let gap = (p * les + (1.0 - p) * es - d.mean()).abs();
            worst = worst.max(gap);
            ensure(gap <= 1e-10, || format!("identity off by {gap:e} on {d:?} at {p}"))?;
            let scale = d.max().abs().max(d.min().abs()).max(1.0);
            ensure(
                (es - oracle_es(&d, p)).abs() <= 1e-10 * scale
                    && (les - oracle_lower_es(&d, p)).abs() <= 1e-10 * scale,
                || format!("tail averages disagree with the sorted oracle on {d:?} at {p}"),
            )?;
        }
    }
    Ok(format!("max gap {worst:.1e} over 4000 cases"))
}

fn criterion_2() -> Outcome {
    let mut worst: f64 = 0.0;
    for d in corpus(1, 1000) {
        let l = d.range_width();
        let t = d.t_transform().range_width();
        ensure(t <= l / 2.0 + 1e-12, || format!("width {t} > {l}/2 on {d:?}"))?;
        if l > 0.0 {
            worst = worst.max(t / l);
        }
    }
    Ok(format!("max width ratio {worst:.4}"))
}

fn criterion_3() -> Outcome {
    let eps = 1e-6;
    let mut most = 0;
    for d in corpus(3, 200) {
        for p in [0.5, 0.9] {
            let c = collapse(&d, p, eps).map_err(|e| e.to_string())?;
            let (es, les) = (oracle_es(&d, p), oracle_lower_es(&d, p));
            for step in &c.trace {
                ensure(
                    (step.es - es).abs() <= 1e-10 && (step.mean - d.mean()).abs() <= 1e-10,
                    || format!("iterate {} drifts on {d:?} at {p}", step.iteration),
                )?;
            }
            let l = d.range_width();
            let bound = if l <= eps { 1 } else { (l / eps).log2().ceil() as usize + 1 };
            ensure(c.iterations <= bound, || {
                format!("{} iterations > bound {bound} on {d:?}", c.iterations)
            })?;
            ensure(collapse_bound(&d, eps) == bound, || "library bound differs".into())?;
            most = most.max(c.iterations);
            let (mut near_es, mut near_les) = (0.0, 0.0);
            for (v, w) in c.terminal.values().iter().zip(c.terminal.probs()) {
                let up = (v - es).abs() <= eps;
                let down = (v - les).abs() <= eps;
                ensure(up || down, || format!("terminal atom {v} outside both bands"))?;
                if up {
                    near_es += w;
                }
                if down {
                    near_les += w;
                }
            }
            ensure(near_es >= 1.0 - p - 1e-10 && near_les >= p - 1e-10, || {
                format!("terminal mass split {near_es}/{near_les} at {p}")
            })?;
        }
    }
    Ok(format!("400 runs, at most {most} iterations"))
}

// Does some weight-(1-p) subset form a tail event of every column?
fn exhaustive_tail_event(s: &ScenarioSet, k: usize) -> bool {
    let m = s.m();
    let size = m - k;
    let p = k as f64 / m as f64;
    let mut idx: Vec<usize> = (0..size).collect();
    loop {
        let cert = TailCertificate {
            event: idx.clone(),
            level: p,
            per_position_threshold: vec![],
        };
        if cert.verify(s) {
            return true;
        }
        // Next combination in lexicographic order.
        let mut i = size;
        while i > 0 && idx[i - 1] == m - size + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return false;
        }
        idx[i - 1] += 1;
        for j in i..size {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn agree(s: &ScenarioSet) -> Result<usize, String> {
    let m = s.m();
    for k in 1..m {
        let p = k as f64 / m as f64;
        let found = find_common_tail_event(s, p).map_err(|e| e.to_string())?;
        let additive = es_additivity_test(s, p, 1e-10).map_err(|e| e.to_string())?;
        let truth = exhaustive_tail_event(s, k);
        if found.is_certificate() != additive || found.is_certificate() != truth {
            return Err(format!(
                "{:?} at p = {k}/{m}: search {}, additivity {additive}, enumeration {truth}",
                s.losses(),
                found.is_certificate()
            ));
        }
        if let Some(c) = found.certificate() {
            ensure(c.verify(s), || "certificate does not verify".into())?;
        }
    }
    Ok(m - 1)
}

fn rows_from_code(mut code: usize, m: usize, base: usize) -> Vec<Vec<f64>> {
    (0..m)
        .map(|_| {
            let x = code % base;
            code /= base;
            let y = code % base;
            code /= base;
            vec![x as f64, y as f64]
        })
        .collect()
}

fn criterion_4() -> Outcome {
    // Every matrix over small alphabets.
    let small: Vec<(usize, usize)> = vec![(2, 4), (3, 4), (4, 3), (5, 3), (6, 2)];
    let mut checks = 0;
    for (m, base) in small {
        let total = base.pow(2 * m as u32);
        checks += (0..total)
            .into_par_iter()
            .map(|code| agree(&ScenarioSet::equiprobable(rows_from_code(code, m, base)).unwrap()))
            .try_reduce(|| 0, |a, b| Ok(a + b))?;
    }
    // Random tie-heavy and continuous sets up to m = 12.
    checks += (0..4000u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_for(4, t);
            let m = rng.gen_range(2..=12);
            let span = [1, 2, 3, 5, 1000][t as usize % 5];
            let rows = (0..m)
                .map(|_| vec![rng.gen_range(0..=span) as f64, rng.gen_range(0..=span) as f64])
                .collect();
            agree(&ScenarioSet::equiprobable(rows).unwrap())
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(format!("{checks} (set, level) pairs, zero disagreements"))
}

fn criterion_5() -> Outcome {
    let trials = 10_000;
    for i in 0..20 {
        let g = PiecewiseLinear::random_lipschitz(&mut rng_for(5, i), 20.0);
        let rho = RiskFunctional::g_form(0.9, move |x| g.eval(x), ProbeGrid::default())
            .map_err(|e| e.to_string())?;
        for axiom in [
            Axiom::Monotonicity,
            Axiom::TranslationInvariance,
            Axiom::ConcentrationAversion { p: 0.9 },
        ] {
            let r = axiom_harness(&rho, axiom, trials, 500 + i).map_err(|e| e.to_string())?;
            ensure(r.passed(), || format!("g #{i} fails {}: {:?}", axiom.name(), r.counterexample))?;
        }
    }
    let planted = |x: f64| {
        if x < 1.0 {
            x
        } else if x < 2.0 {
            1.0 + 1.5 * (x - 1.0)
        } else {
            2.5 + (x - 2.0)
        }
    };
    ensure(
        RiskFunctional::g_form(0.9, planted, ProbeGrid::default()).is_err(),
        || "certification accepted a slope of 1.5".into(),
    )?;
    let rho = RiskFunctional::g_form_unchecked(0.9, planted).map_err(|e| e.to_string())?;
    let r = axiom_harness(&rho, Axiom::Monotonicity, trials, 5).map_err(|e| e.to_string())?;
    let ce = r.counterexample.ok_or("planted slope 1.5 not caught")?;
    Ok(format!(
        "60 harness runs clean; planted g caught at trial {} ({} shrink steps)",
        ce.trial, ce.shrink_steps
    ))
}

fn criterion_6() -> Outcome {
    let trials = 10_000;
    let smooth = |x: f64| (1.0 + x * x).sqrt() - 1.0;
    let convex = RiskFunctional::g_form(0.9, smooth, ProbeGrid::default()).map_err(|e| e.to_string())?;
    let r = axiom_harness(&convex, Axiom::Convexity, trials, 61).map_err(|e| e.to_string())?;
    ensure(r.passed(), || format!("convex g fails convexity: {:?}", r.counterexample))?;

    let capped = RiskFunctional::g_form(0.9, |x: f64| x.min(1.0), ProbeGrid::default())
        .map_err(|e| e.to_string())?;
    let r = axiom_harness(&capped, Axiom::Convexity, trials, 62).map_err(|e| e.to_string())?;
    ensure(!r.passed(), || "min(x, 1) passed convexity".into())?;

    let mix = RiskFunctional::coherent_mix(0.9, 0.4).map_err(|e| e.to_string())?;
    for axiom in [Axiom::PositiveHomogeneity, Axiom::Convexity] {
        let r = axiom_harness(&mix, axiom, trials, 63).map_err(|e| e.to_string())?;
        ensure(r.passed(), || format!("coherent mix fails {}", axiom.name()))?;
    }
    let r = axiom_harness(&convex, Axiom::PositiveHomogeneity, trials, 64).map_err(|e| e.to_string())?;
    ensure(!r.passed(), || "strictly convex g passed positive homogeneity".into())?;
    Ok("convex g and mix pass; min(x, 1) and sqrt(1 + x²) − 1 caught".into())
}

fn grid_min(s: &ScenarioSet, p: f64, u: f64) -> Option<f64> {
    let mut best: Option<f64> = None;
    let mut visit = |a: &[f64]| {
        let law = s.law(&s.combine(a).unwrap());
        if -law.mean() >= u - 1e-12 {
            let es = oracle_es(&law, p);
            best = Some(best.map_or(es, |b: f64| b.min(es)));
        }
    };
    match s.k() {
        1 => visit(&[1.0]),
        2 => (0..=100).for_each(|i| visit(&[i as f64 / 100.0, 1.0 - i as f64 / 100.0])),
        _ => {
            for i in 0..=100 {
                for j in 0..=100 - i {
                    let (a, b) = (i as f64 / 100.0, j as f64 / 100.0);
                    visit(&[a, b, (1.0 - a - b).max(0.0)]);
                }
            }
        }
    }
    best
}

fn criterion_7() -> Outcome {
    let (mut worst_grid, mut worst_ru): (f64, f64) = (0.0, 0.0);
    for t in 0..100 {
        let mut rng = rng_for(7, t);
        let k = rng.gen_range(1..=3);
        let m = rng.gen_range(2..=10);
        let cols: Vec<Vec<f64>> = (0..k)
            .map(|_| {
                let drift = rng.gen_range(-0.02..0.02);
                (0..m).map(|_| drift + rng.gen_range(-0.05..0.05)).collect()
            })
            .collect();
        let s = ScenarioSet::from_columns(&cols, vec![1.0 / m as f64; m]).map_err(|e| e.to_string())?;
        let p = [0.5, 0.75, 0.8, 0.9][t as usize % 4];
        let prob = PortfolioProblem::new(s.clone(), p, FeasibleSet::Simplex, Mode::MinEsGivenReturn(0.0))
            .map_err(|e| e.to_string())?;
        let (lo, hi) = return_range(&prob).map_err(|e| e.to_string())?.ok_or("empty simplex")?;
        let u = lo + 0.3 * (hi - lo);
        let out = solve(&prob.with_mode(Mode::MinEsGivenReturn(u))).map_err(|e| e.to_string())?;
        ensure(out.status == Status::Optimal, || format!("instance {t}: {:?}", out.status))?;
        let a = out.allocation.unwrap();
        let direct = oracle_es(&s.law(&s.combine(&a.weights).unwrap()), p);
        let ru = (a.lp_objective - direct).abs();
        ensure(ru <= 1e-8, || format!("instance {t}: LP {} vs direct {direct}", a.lp_objective))?;
        let grid = grid_min(&s, p, u).ok_or("grid has no feasible point")?;
        ensure(a.lp_objective <= grid + 1e-9 && grid - a.lp_objective <= 1e-3, || {
            format!("instance {t}: LP {} vs grid {grid}", a.lp_objective)
        })?;
        worst_grid = worst_grid.max(grid - a.lp_objective);
        worst_ru = worst_ru.max(ru);
    }
    Ok(format!("grid gap ≤ {worst_grid:.1e}, RU gap ≤ {worst_ru:.1e}"))
}

fn criterion_8() -> Outcome {
    let cfg = LlnConfig::new(10_000, 100, 8);
    let run = |c: &CheckerboardCopula, cfg: &LlnConfig| c.lln_diagnostic(cfg).map_err(|e| e.to_string());
    let co = run(&CheckerboardCopula::comonotone(64), &cfg)?;
    ensure(co.verdict == Verdict::NonDiversifiable, || format!("comonotone: {:?}", co.verdict))?;
    let ind = run(&CheckerboardCopula::independence(64), &cfg)?;
    ensure(ind.verdict == Verdict::Diversifiable, || format!("independence: {:?}", ind.verdict))?;
    let blocks = CheckerboardCopula::block_diagonal(64, 32).map_err(|e| e.to_string())?;
    let bd = run(&blocks, &cfg.with_level(0.5))?;
    ensure(bd.verdict == Verdict::NonDiversifiable, || format!("blocks: {:?}", bd.verdict))?;
    let tail = bd.tail.ok_or("no tail report")?;
    ensure(tail.in_dp && (tail.mean - 0.75).abs() <= 0.02, || {
        format!("tail mean {} over {} chains", tail.mean, tail.chains)
    })?;
    Ok(format!(
        "deviations q90: comonotone {:.3}, independence {:.4}, blocks {:.3}; tail mean {:.4}",
        co.deviation.q90, ind.deviation.q90, bd.deviation.q90, tail.mean
    ))
}

fn criterion_9() -> Outcome {
    let results: Vec<Result<bool, String>> = (0..50u64)
        .into_par_iter()
        .map(|t| {
            let c = CheckerboardCopula::random(&mut rng_for(9, t), 16);
            let d = c.densify();
            ensure(concordance_leq(&c, &d), || format!("copula {t}: densify does not dominate"))?;
            ensure(d.margin_error() <= 1e-12, || format!("copula {t}: margins off"))?;
            if !c.is_strict_interior() {
                return Ok(false);
            }
            ensure(d.fills_b_region(&c.b_region()), || format!("copula {t}: B region not filled"))?;
            let diag = d
                .lln_diagnostic(&LlnConfig::new(10_000, 100, 900 + t))
                .map_err(|e| e.to_string())?;
            ensure(diag.verdict == Verdict::Diversifiable, || {
                format!(
                    "copula {t}: {:?} (q90 {:.4}, band {:.4})",
                    diag.verdict, diag.deviation.q90, diag.band
                )
            })?;
            Ok(true)
        })
        .collect();
    let mut interior = 0;
    for r in results {
        interior += r? as usize;
    }
    ensure(interior > 0, || "no strict-interior copula drawn".into())?;
    Ok(format!("50 dominate; {interior} strict-interior copulas filled and diversifiable"))
}

struct Case {
    name: &'static str,
    args: Vec<String>,
    exit: i32,
    /// Extra files written by the command, relative to the scratch dir.
    extra: Vec<&'static str>,
}

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
        .display()
        .to_string()
}

fn cases(dir: &Path) -> Vec<Case> {
    let scratch = |f: &str| dir.join(f).display().to_string();
    let a = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    vec![
        Case {
            name: "risk.json",
            args: a(&["risk", "--scenarios", &fixture("uniform10.csv"), "--p", "0.8", "--measure", "mix:0.5"]),
            exit: 0,
            extra: vec![],
        },
        Case {
            name: "risk.txt",
            args: a(&["risk", "--scenarios", &fixture("assets.csv"), "--p", "0.75", "--format", "text"]),
            exit: 0,
            extra: vec![],
        },
        Case {
            name: "concentration_comonotone.json",
            args: a(&["concentration", "--scenarios", &fixture("comonotone.csv"), "--p", "0.6"]),
            exit: 0,
            extra: vec![],
        },
        Case {
            name: "concentration_anti.json",
            args: a(&["concentration", "--scenarios", &fixture("anti.csv"), "--p", "0.5"]),
            exit: 1,
            extra: vec![],
        },
        Case {
            name: "concentration_misaligned.json",
            args: a(&["concentration", "--scenarios", &fixture("misaligned.csv"), "--p", "0.5"]),
            exit: 1,
            extra: vec![],
        },
        Case {
            name: "frontier.csv",
            args: a(&[
                "frontier",
                "--scenarios",
                &fixture("assets.csv"),
                "--config",
                &fixture("frontier.json"),
                "--summary",
                &scratch("frontier_summary.json"),
            ]),
            exit: 0,
            extra: vec!["frontier_summary.json"],
        },
        Case {
            name: "check_dp.json",
            args: a(&["copula", "check-dp", "--copula", &fixture("block8.json")]),
            exit: 0,
            extra: vec![],
        },
        Case {
            name: "densify.json",
            args: a(&[
                "copula",
                "densify",
                "--copula",
                &fixture("interior8.json"),
                "--copula-out",
                &scratch("densified.json"),
            ]),
            exit: 0,
            extra: vec!["densified.json"],
        },
        Case {
            name: "simulate.json",
            args: a(&[
                "copula",
                "simulate",
                "--copula",
                &fixture("comonotone8.json"),
                "--seed",
                "7",
                "--length",
                "1000",
                "--replications",
                "20",
                "--p",
                "0.5",
                "--partial-means",
                &scratch("partial_means.csv"),
            ]),
            exit: 1,
            extra: vec!["partial_means.csv"],
        },
        Case {
            name: "collapse.json",
            args: a(&["collapse", "--dist", &fixture("dist.csv"), "--p", "0.7", "--eps", "1e-6"]),
            exit: 0,
            extra: vec![],
        },
    ]
}

// Runs every case into `dir` and returns (file name, bytes) pairs.
fn run_cases(dir: &Path, threads: &str) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut files = Vec::new();
    for case in cases(dir) {
        let out = Command::new(env!("CARGO_BIN_EXE_concentra"))
            .args(&case.args)
            .env("CONCENTRA_THREADS", threads)
            .output()
            .map_err(|e| e.to_string())?;
        let code = out.status.code().unwrap_or(-1);
        ensure(code == case.exit, || {
            format!(
                "{}: exit {code}, expected {} ({})",
                case.name,
                case.exit,
                String::from_utf8_lossy(&out.stderr).trim()
            )
        })?;
        files.push((case.name.to_string(), out.stdout));
        for extra in case.extra {
            let bytes = std::fs::read(dir.join(extra)).map_err(|e| format!("{extra}: {e}"))?;
            files.push((extra.to_string(), bytes));
        }
    }
    Ok(files)
}

fn criterion_10() -> Outcome {
    let golden = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    // The scratch path appears in no output, so both runs share it.
    let first = run_cases(dir.path(), "4")?;
    let second = run_cases(dir.path(), "1")?;
    for ((name, a), (_, b)) in first.iter().zip(&second) {
        ensure(a == b, || format!("{name} differs between runs"))?;
    }
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(&golden).map_err(|e| e.to_string())?;
        for (name, bytes) in &first {
            std::fs::write(golden.join(name), bytes).map_err(|e| e.to_string())?;
        }
        return Ok(format!("rewrote {} golden files", first.len()));
    }
    for (name, bytes) in &first {
        let want = std::fs::read(golden.join(name)).map_err(|e| format!("golden {name}: {e}"))?;
        ensure(&want == bytes, || format!("{name} differs from its golden file"))?;
    }
    Ok(format!("{} outputs byte-identical across runs and goldens", first.len()))
}

fn main() {
    // libtest flags such as --nocapture may be passed; only a filter matters.
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let criteria: [Criterion; 10] = [
        (1, "mean identity", 5, criterion_1),
        (2, "midpoint transform halves the range", 5, criterion_2),
        (3, "collapse to the two-point law", 30, criterion_3),
        (4, "tail events vs ES additivity", 60, criterion_4),
        (5, "monetary g forms", 120, criterion_5),
        (6, "consistent, convex, coherent", 60, criterion_6),
        (7, "portfolio LP", 60, criterion_7),
        (8, "copula LLN diagnostics", 60, criterion_8),
        (9, "densification", 120, criterion_9),
        (10, "CLI determinism", 10, criterion_10),
    ];
    let mut failed = 0;
    for (id, name, budget, f) in criteria {
        if let Some(filter) = &filter {
            if !name.contains(filter.as_str()) && filter != &id.to_string() {
                continue;
            }
        }
        let start = Instant::now();
        let result = std::panic::catch_unwind(f).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let took = start.elapsed();
        let (status, detail) = match result {
            Ok(_) if took > Duration::from_secs(budget) => ("FAIL", format!("over the {budget} s budget")),
            Ok(detail) => ("PASS", detail),
            Err(why) => ("FAIL", why),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!(
            "criterion {id:>2} {status} {:>7.2}s/{budget}s  {name}: {detail}",
            took.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
