use invmargin::constraints::{ConstraintSystem, Family, LinExpr, Sense, VarRole};
use invmargin::cyclebound::{r1_constraints_enumerated, r2_constraints, simple_cycles, SymbolicDigraph, CYCLE_LIMIT};
use invmargin::fixtures::random_digraph;
use invmargin::qp::{self, check_kkt, QpProblem, Status};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn symbolic(g: invmargin::graph::Digraph) -> (ConstraintSystem, SymbolicDigraph) {
    let mut sys = ConstraintSystem::new();
    let lengths = (0..g.arc_count()).map(|a| LinExpr::var(sys.add_var(VarRole::Weight(a)))).collect();
    (sys, SymbolicDigraph::new(g, lengths).unwrap())
}

fn min_cycle(g: &invmargin::graph::Digraph, lengths: &[f64]) -> f64 {
    simple_cycles(g, CYCLE_LIMIT)
        .unwrap()
        .iter()
        .map(|c| c.iter().map(|&a| lengths[a]).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // Integer lengths keep every comparison exact.
    #[test]
    fn compact_region_agrees_with_cycle_rows(seed in any::<u64>(), delta in 0u32..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(2..=6);
        let density = rng.random_range(0.3..0.8);
        let g = random_digraph(&mut rng, n, density);
        let lengths: Vec<f64> = (0..g.arc_count()).map(|_| rng.random_range(-3i32..=4) as f64).collect();
        let delta = delta as f64;
        let (mut sys, sg) = symbolic(g.clone());
        let layout = r2_constraints(&mut sys, &sg, delta).unwrap();
        let mut values = vec![0.0; sys.var_count()];
        values[..lengths.len()].copy_from_slice(&lengths);
        let completed = layout.complete(&sg, delta, &mut values);
        let holds = min_cycle(&g, &lengths) >= delta;
        prop_assert_eq!(completed, holds);
        if completed {
            prop_assert!(sys.max_violation(&values) <= 1e-9);
        }

        let (mut r1, sg1) = symbolic(g.clone());
        r1_constraints_enumerated(&mut r1, &sg1, delta).unwrap();
        let mut v1 = vec![0.0; r1.var_count()];
        v1[..lengths.len()].copy_from_slice(&lengths);
        v1[lengths.len()..].copy_from_slice(&lengths);
        prop_assert_eq!(r1.max_violation(&v1) == 0.0, holds);
    }

    // Any point of the compact region, here a projection onto it, has all
    // simple cycles at least delta.
    #[test]
    fn projected_points_satisfy_cycle_rows(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(2..=5);
        let g = random_digraph(&mut rng, n, 0.6);
        let delta = rng.random_range(0.0..2.0);
        let (mut sys, sg) = symbolic(g.clone());
        r2_constraints(&mut sys, &sg, delta).unwrap();
        let anchors = (0..g.arc_count()).map(|a| (a, rng.random_range(-3.0..3.0))).collect();
        let sol = qp::solve(&QpProblem::new(sys, anchors).unwrap());
        prop_assert_eq!(sol.status, Status::Optimal);
        prop_assert!(min_cycle(&g, &sol.values[..g.arc_count()]) >= delta - 1e-6);
    }

    #[test]
    fn halfspace_projection_closed_form(
        a in prop::collection::vec(-5.0f64..5.0, 1..6),
        seed in any::<u64>(),
        b in -5.0f64..5.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c: Vec<f64> = a.iter().map(|_| rng.random_range(0.5..2.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
        let mut sys = ConstraintSystem::new();
        for e in 0..a.len() {
            sys.add_var(VarRole::Weight(e));
        }
        sys.push(c.iter().copied().enumerate(), Sense::Ge, b, Family::Competitor).unwrap();
        let p = QpProblem::new(sys, a.iter().copied().enumerate().collect()).unwrap();
        let sol = qp::solve(&p);
        let ca: f64 = c.iter().zip(&a).map(|(x, y)| x * y).sum();
        let cc: f64 = c.iter().map(|x| x * x).sum();
        let step = (b - ca).max(0.0) / cc;
        for e in 0..a.len() {
            prop_assert!((sol.values[e] - (a[e] + step * c[e])).abs() < 1e-6);
        }
        prop_assert!(check_kkt(&p, &sol).passes(1e-5));
    }

    #[test]
    fn solver_is_deterministic_and_scale_covariant(seed in any::<u64>(), k in 0.25f64..4.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_digraph(&mut rng, 4, 0.6);
        let delta = rng.random_range(0.0..2.0);
        let anchors: Vec<f64> = (0..g.arc_count()).map(|_| rng.random_range(-3.0..3.0)).collect();
        let build = |scale: f64| {
            let (mut sys, sg) = symbolic(g.clone());
            r2_constraints(&mut sys, &sg, scale * delta).unwrap();
            QpProblem::new(sys, anchors.iter().map(|x| scale * x).enumerate().collect()).unwrap()
        };
        let p = build(1.0);
        let first = qp::solve(&p);
        let second = qp::solve(&p);
        prop_assert_eq!(&first.values, &second.values);
        let scaled = qp::solve(&build(k));
        prop_assert!((scaled.objective - k * k * first.objective).abs() <= 1e-6 * (1.0 + k * k * first.objective));
        for a in 0..g.arc_count() {
            prop_assert!((scaled.values[a] - k * first.values[a]).abs() < 1e-5 * (1.0 + k));
        }
    }
}
