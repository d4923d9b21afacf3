use concentra::portfolio::{evaluate, return_range};
use concentra::risk;
use concentra::sampling::rng_for;
use concentra::{frontier, solve, FeasibleSet, Mode, PortfolioProblem, ScenarioSet, Status};
use rand::Rng;

fn instance(seed: u64) -> ScenarioSet {
    let mut rng = rng_for(seed, 0);
    let k = rng.gen_range(1..=3);
    let m = rng.gen_range(2..=10);
    let cols: Vec<Vec<f64>> = (0..k)
        .map(|_| {
            let drift = rng.gen_range(-0.02..0.02);
            (0..m).map(|_| drift + rng.gen_range(-0.05..0.05)).collect()
        })
        .collect();
    ScenarioSet::from_columns(&cols, vec![1.0 / m as f64; m]).unwrap()
}

// Minimum ES over the 0.01-step simplex grid subject to the return target.
fn grid_min(s: &ScenarioSet, p: f64, u: f64) -> Option<f64> {
    let k = s.k();
    let mut best: Option<f64> = None;
    let mut visit = |a: &[f64]| {
        let loss = s.combine(a).unwrap();
        let law = s.law(&loss);
        if -law.mean() >= u - 1e-12 {
            let es = risk::es(&law, p).unwrap();
            best = Some(best.map_or(es, |b: f64| b.min(es)));
        }
    };
    match k {
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

#[test]
fn lp_matches_grid_and_is_tight() {
    for seed in 0..100 {
        let s = instance(seed);
        let p = [0.5, 0.75, 0.8, 0.9][seed as usize % 4];
        let base = PortfolioProblem::new(s.clone(), p, FeasibleSet::Simplex, Mode::MinEsGivenReturn(-1.0))
            .unwrap();
        let (lo, hi) = return_range(&base).unwrap().unwrap();
        let u = lo + 0.3 * (hi - lo);
        let out = solve(&base.with_mode(Mode::MinEsGivenReturn(u))).unwrap();
        assert_eq!(out.status, Status::Optimal);
        let a = out.allocation.unwrap();
        assert!((a.lp_objective - a.es_value).abs() <= 1e-8, "seed {seed}");
        let grid = grid_min(&s, p, u).unwrap();
        assert!(a.es_value <= grid + 1e-9 && grid - a.es_value <= 1e-3, "seed {seed}: {} vs {grid}", a.es_value);
    }
}

#[test]
fn dropping_the_return_constraint_never_hurts() {
    for seed in 100..200 {
        let s = instance(seed);
        let prob = PortfolioProblem::new(s, 0.8, FeasibleSet::Simplex, Mode::MinEsGivenReturn(-1.0)).unwrap();
        let (lo, hi) = return_range(&prob).unwrap().unwrap();
        let free = solve(&prob.with_mode(Mode::MinEsGivenReturn(lo - 1.0))).unwrap();
        let tight = solve(&prob.with_mode(Mode::MinEsGivenReturn(0.5 * (lo + hi)))).unwrap();
        assert!(
            free.allocation.unwrap().lp_objective <= tight.allocation.unwrap().lp_objective + 1e-12
        );
    }
}

#[test]
fn frontier_scales_with_losses() {
    for seed in 200..230 {
        let s = instance(seed);
        let lambda = 3.5;
        let p = 0.75;
        let a = PortfolioProblem::new(s.clone(), p, FeasibleSet::Simplex, Mode::MinEsGivenReturn(0.0)).unwrap();
        let b = PortfolioProblem::new(s.scaled(lambda), p, FeasibleSet::Simplex, Mode::MinEsGivenReturn(0.0))
            .unwrap();
        let fa = frontier(&a, 6).unwrap();
        let fb = frontier(&b, 6).unwrap();
        assert_eq!(fa.len(), fb.len());
        for (x, y) in fa.iter().zip(&fb) {
            let (x, y) = (x.allocation.as_ref().unwrap(), y.allocation.as_ref().unwrap());
            assert!((lambda * x.es_value - y.es_value).abs() <= 1e-9);
            assert!((lambda * x.mean_return - y.mean_return).abs() <= 1e-9);
        }
        for w in fa.windows(2) {
            let (x, y) = (w[0].allocation.as_ref().unwrap(), w[1].allocation.as_ref().unwrap());
            assert!(x.es_value <= y.es_value + 1e-9);
        }
    }
}

#[test]
fn comonotone_assets_give_a_segment() {
    let x1: Vec<f64> = (0..10).map(|j| j as f64 - 5.0).collect();
    let x2: Vec<f64> = x1.iter().map(|v| 3.0 * v - 2.0).collect();
    let s = ScenarioSet::from_columns(&[x1, x2], vec![0.1; 10]).unwrap();
    let p = 0.8;
    let prob = PortfolioProblem::new(s, p, FeasibleSet::Simplex, Mode::MinEsGivenReturn(0.0)).unwrap();
    let ends: Vec<_> = [vec![1.0, 0.0], vec![0.0, 1.0]]
        .into_iter()
        .map(|w| evaluate(&prob, w, 0.0).unwrap())
        .collect();
    for pt in frontier(&prob, 9).unwrap() {
        let a = pt.allocation.unwrap();
        let lam = a.weights[0];
        let es = lam * ends[0].es_value + (1.0 - lam) * ends[1].es_value;
        let mean = lam * ends[0].mean_return + (1.0 - lam) * ends[1].mean_return;
        assert!((a.es_value - es).abs() <= 1e-9 && (a.mean_return - mean).abs() <= 1e-9);
        assert!((a.mean_return - pt.target).abs() <= 1e-9);
    }
}
