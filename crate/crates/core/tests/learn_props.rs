use invmargin::constraints::{Sense, VarRole};
use invmargin::fixtures::random_digraph;
use invmargin::graph::BipartiteGraph;
use invmargin::learn::{
    argmax, best_other, induced_weights, lifted_problem, predict, update, FeaturizedExample, Model, Problem,
};
use invmargin::qp::{QpSettings, Status};
use invmargin::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_problem(rng: &mut ChaCha8Rng) -> Problem {
    loop {
        let p = match rng.random_range(0..3) {
            0 => {
                let nodes = rng.random_range(2..=5);
                let m = rng.random_range(nodes - 1..=8);
                let edges = (0..m).map(|_| (rng.random_range(0..nodes), rng.random_range(0..nodes))).collect();
                Problem::SpanningTree { nodes, edges }
            }
            1 => {
                let n = rng.random_range(2..=5);
                Problem::Arborescence { graph: random_digraph(rng, n, 0.6), root: 0 }
            }
            _ => {
                let n = rng.random_range(1..=4);
                let edges = (0..n).flat_map(|l| (0..n).map(move |r| (l, r))).filter(|_| rng.random_bool(0.7)).collect();
                Problem::PerfectMatching(BipartiteGraph::new(n, n, edges).unwrap())
            }
        };
        if !p.enumerate().unwrap().is_empty() {
            return p;
        }
    }
}

fn random_example(seed: u64) -> FeaturizedExample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let problem = random_problem(&mut rng);
    let dim = rng.random_range(1..=4);
    let features =
        (0..problem.element_count()).map(|_| (0..dim).map(|_| rng.random_range(-2i32..=2) as f64).collect()).collect();
    let all = problem.enumerate().unwrap();
    let truth = all[rng.random_range(0..all.len())].clone();
    FeaturizedExample::new(problem, features, truth).unwrap()
}

fn total(set: &[usize], w: &[f64]) -> f64 {
    set.iter().map(|&e| w[e]).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // Small integer weights make ties frequent.
    #[test]
    fn argmax_is_lexicographic_best(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_problem(&mut rng);
        let w: Vec<f64> = (0..p.element_count()).map(|_| rng.random_range(-2i32..=2) as f64).collect();
        let all = p.enumerate().unwrap();
        let best = all.iter().map(|s| total(s, &w)).fold(f64::NEG_INFINITY, f64::max);
        let expect = all.iter().filter(|s| total(s, &w) == best).min().unwrap();
        prop_assert_eq!(&argmax(&p, &w).unwrap(), expect);

        let y = &all[rng.random_range(0..all.len())];
        let runner = all.iter().filter(|s| *s != y).map(|s| total(s, &w)).fold(f64::NEG_INFINITY, f64::max);
        match best_other(&p, &w, y) {
            Some(s) => {
                prop_assert!(&s != y && p.is_feasible(&s));
                prop_assert_eq!(total(&s, &w), runner);
            }
            None => prop_assert_eq!(all.len(), 1),
        }
    }

    #[test]
    fn prediction_ignores_positive_scaling(seed in any::<u64>(), c in 0.01f64..100.0) {
        let ex = random_example(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(!seed);
        let theta: Vec<f64> = (0..ex.dim()).map(|_| rng.random_range(-2i32..=2) as f64).collect();
        let scaled = Model { theta: theta.iter().map(|t| c * t).collect() };
        prop_assert_eq!(predict(&Model { theta }, &ex).unwrap(), predict(&scaled, &ex).unwrap());
    }

    #[test]
    fn lift_matches_substitution(seed in any::<u64>()) {
        let ex = random_example(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(!seed);
        let delta = rng.random_range(0.0..2.0);
        let f = ex.problem.formulate(&ex.truth, delta).unwrap();
        let (lifted, map) = match f.system.lift(&ex.features) {
            Ok(l) => l,
            Err(Error::Infeasible(_)) => {
                // Elements with equal features can cancel a whole row.
                let vanishes = f.system.rows().iter().any(|r| {
                    let mut coef = vec![0.0; ex.dim()];
                    for &(v, c) in &r.terms {
                        match f.system.roles()[v] {
                            VarRole::Weight(e) => coef.iter_mut().zip(&ex.features[e]).for_each(|(a, x)| *a += c * x),
                            _ => return false,
                        }
                    }
                    coef.iter().all(|a| a.abs() < 1e-12) && r.sense == Sense::Ge && r.rhs > 0.0
                });
                prop_assert!(vanishes);
                return Ok(());
            }
            Err(e) => panic!("{e}"),
        };
        let theta: Vec<f64> = (0..ex.dim()).map(|_| rng.random_range(-2.0..2.0)).collect();
        let w = induced_weights(&Model { theta: theta.clone() }, &ex).unwrap();
        let mut orig = vec![0.0; f.system.var_count()];
        let mut new = vec![0.0; lifted.var_count()];
        new[..theta.len()].copy_from_slice(&theta);
        for (v, role) in f.system.roles().iter().enumerate() {
            match *role {
                VarRole::Weight(e) => orig[v] = w[e],
                _ => {
                    let x = rng.random_range(-3.0..3.0);
                    orig[v] = x;
                    new[map[v].unwrap()] = x;
                }
            }
        }
        prop_assert_eq!(lifted.row_count(), f.system.row_count());
        for (a, b) in f.system.rows().iter().zip(lifted.rows()) {
            prop_assert_eq!(a.sense, b.sense);
            prop_assert!((a.lhs(&orig) - b.lhs(&new)).abs() < 1e-9);
        }
    }

    #[test]
    fn update_enforces_margin(seed in any::<u64>(), delta in 0.0f64..3.0) {
        let ex = random_example(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(!seed);
        let model = Model { theta: (0..ex.dim()).map(|_| rng.random_range(-2.0..2.0)).collect() };
        let out = update(&model, &ex, delta, &QpSettings::default()).unwrap();
        if out.status != Status::Optimal {
            prop_assert_eq!(&out.model, &model);
            return Ok(());
        }
        let w = induced_weights(&out.model, &ex).unwrap();
        let mine = total(&ex.truth, &w);
        for other in ex.problem.enumerate().unwrap().iter().filter(|s| **s != ex.truth) {
            prop_assert!(mine - total(other, &w) >= delta - 1e-6);
        }
        let moved: f64 = out.model.theta.iter().zip(&model.theta).map(|(a, b)| (a - b).powi(2)).sum();
        prop_assert!((moved - out.objective).abs() <= 1e-7 * (1.0 + moved));
    }

    // With one indicator feature per element the update is the inverse
    // problem in element space.
    #[test]
    fn identity_features_reduce_to_inverse(seed in any::<u64>(), delta in 0.0f64..3.0) {
        let base = random_example(seed);
        let m = base.problem.element_count();
        let features = (0..m).map(|e| (0..m).map(|k| f64::from(u8::from(e == k))).collect()).collect();
        let ex = FeaturizedExample::new(base.problem.clone(), features, base.truth.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(!seed);
        let theta: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
        let s = QpSettings::default();
        let out = update(&Model { theta: theta.clone() }, &ex, delta, &s).unwrap();
        let direct = ex.problem.formulate(&ex.truth, delta).unwrap().solve(&theta, &s).unwrap();
        prop_assert!((out.objective - direct.objective).abs() <= 1e-6 * (1.0 + direct.objective));
        for (a, b) in out.model.theta.iter().zip(&direct.weights) {
            prop_assert!((a - b).abs() < 1e-5);
        }
    }
}

#[test]
fn lifted_rows_keep_their_senses() {
    let ex = random_example(5);
    let p = lifted_problem(&Model::zeros(ex.dim()), &ex, 1.0).unwrap();
    assert!(p.system.rows().iter().any(|r| r.sense != Sense::Eq));
    assert_eq!(p.anchors.len(), ex.dim());
}
