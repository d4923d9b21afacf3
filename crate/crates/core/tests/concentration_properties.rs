use concentra::concentration::{collapse_bound, es_gap, TailCertificate};
use concentra::risk::{self, RiskFunctional};
use concentra::sampling::{permutation, random_distribution, rng_for};
use concentra::{
    collapse, couple, es_additivity_test, find_common_tail_event, CoupleStyle, DiscreteDistribution,
    ScenarioSet,
};
use rand::Rng;

// Every weight-(1-p) subset that is a tail event of both columns.
fn exhaustive(s: &ScenarioSet, p: f64) -> bool {
    let m = s.m();
    (0u32..1 << m).any(|mask| {
        let ev: Vec<usize> = (0..m).filter(|b| mask >> b & 1 == 1).collect();
        TailCertificate {
            event: ev,
            level: p,
            per_position_threshold: vec![],
        }
        .verify(s)
    })
}

#[test]
fn search_agrees_with_enumeration_and_additivity() {
    let mut rng = rng_for(20, 0);
    for _ in 0..3000 {
        let m = rng.gen_range(1..=12);
        let span = rng.gen_range(1..=4);
        let rows: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..2).map(|_| rng.gen_range(0..=span) as f64).collect())
            .collect();
        let s = ScenarioSet::equiprobable(rows).unwrap();
        for k in 1..m {
            let p = k as f64 / m as f64;
            let v = find_common_tail_event(&s, p).unwrap();
            assert_eq!(v.is_certificate(), exhaustive(&s, p), "{s:?} at {p}");
            if let Some(c) = v.certificate() {
                assert!(c.verify(&s));
            }
            assert_eq!(v.is_certificate(), es_additivity_test(&s, p, 1e-10).unwrap());
        }
    }
}

#[test]
fn couplings_always_certify() {
    let mut rng = rng_for(21, 0);
    for t in 0..300 {
        let dx = random_distribution(&mut rng, 20, -10.0, 10.0);
        let dy = random_distribution(&mut rng, 20, -10.0, 10.0);
        let (m, k) = (20, rng.gen_range(1..20));
        let p = k as f64 / m as f64;
        for style in [
            CoupleStyle::Comonotone,
            CoupleStyle::TailBlockAntitone,
            CoupleStyle::TailBlockShuffle { seed: t },
        ] {
            let s = couple(&dx, &dy, p, style, m).unwrap();
            assert!(find_common_tail_event(&s, p).unwrap().is_certificate());
            assert!(es_gap(&s, p).unwrap().abs() <= 1e-10);
        }
    }
}

#[test]
fn collapse_preserves_es_and_mean() {
    let mut rng = rng_for(22, 0);
    for _ in 0..200 {
        let d = random_distribution(&mut rng, 50, -100.0, 100.0);
        for p in [0.3, 0.5, 0.9] {
            let c = collapse(&d, p, 1e-6).unwrap();
            let es = risk::es(&d, p).unwrap();
            for step in &c.trace {
                assert!((step.es - es).abs() <= 1e-10);
                assert!((step.mean - d.mean()).abs() <= 1e-10);
            }
            for w in c.trace.windows(2) {
                assert!(w[1].upper_width <= w[0].upper_width / 2.0 + 1e-12);
                assert!(w[1].lower_width <= w[0].lower_width / 2.0 + 1e-12);
            }
            assert!(c.iterations <= collapse_bound(&d, 1e-6));
        }
    }
}

#[test]
fn f_forms_prefer_concentrated_sums() {
    // f nondecreasing in its first argument.
    let rho = RiskFunctional::f_form(0.8, |x: f64, y: f64| x.max(y + 1.0) + 0.3 * y).unwrap();
    let mut rng = rng_for(23, 0);
    for t in 0..1000 {
        let dx = random_distribution(&mut rng, 10, -5.0, 5.0);
        let dy = random_distribution(&mut rng, 10, -5.0, 5.0);
        let m = 20;
        let conc = couple(&dx, &dy, 0.8, CoupleStyle::TailBlockShuffle { seed: t }, m).unwrap();
        let perm = permutation(&mut rng, m);
        let rows = (0..m)
            .map(|j| vec![conc.losses()[j][0], conc.losses()[perm[j]][1]])
            .collect();
        let free = ScenarioSet::equiprobable(rows).unwrap();
        let a = rho.evaluate(&conc.law(&conc.total()));
        let b = rho.evaluate(&free.law(&free.total()));
        assert!(a >= b - 1e-10);
    }
}

#[test]
fn constant_columns_are_always_concentrated() {
    let d = DiscreteDistribution::uniform(&[1.0, 4.0, 2.0, 8.0]).unwrap();
    let c = DiscreteDistribution::point(3.0).unwrap();
    for style in [CoupleStyle::Comonotone, CoupleStyle::TailBlockAntitone] {
        let s = couple(&d, &c, 0.5, style, 4).unwrap();
        assert!(es_additivity_test(&s, 0.5, 1e-10).unwrap());
    }
}
