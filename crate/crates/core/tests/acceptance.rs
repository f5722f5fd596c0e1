//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero on any failure that is not a known gap.

use std::time::Instant;

use invmargin::constraints::{ConstraintSystem, LinExpr, VarRole};
use invmargin::cyclebound::{r1_constraints_enumerated, r2_constraints, simple_cycles, SymbolicDigraph, CYCLE_LIMIT};
use invmargin::fixtures::{goldens, random_digraph, random_instance, random_matching, separable_tree_stream};
use invmargin::graph::Digraph;
use invmargin::instance::{Instance, Kind, Structure};
use invmargin::inverse::arborescence::{arborescence_matroids, formulate_arborescence};
use invmargin::inverse::intersection::exchange_graph;
use invmargin::inverse::matching::build_aux_graph;
use invmargin::inverse::OptSense;
use invmargin::learn::{hinge_bound, predict, train_epochs, Loss, Problem, RoundStatus};
use invmargin::oracle::{alternating_cycles, oracle_problem, oracle_solve, verify_with, Semantics};
use invmargin::qp::{self, check_kkt, QpProblem, QpSettings, QpSolution, Status};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20_240_601;
const PER_KIND: usize = 100;

/// Kinds whose compact formulation encodes a strictly larger competitor set
/// than the definition's simple paths.
const PATH_KINDS: [Kind; 2] = [Kind::StPath, Kind::SpTree];

struct Suite {
    unexpected: Vec<String>,
    audited: Vec<(QpProblem, QpSolution)>,
}

impl Suite {
    fn report(&mut self, id: u32, pass: bool, detail: String, gap_ok: bool) {
        println!("criterion {id}: {} {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass && !gap_ok {
            self.unexpected.push(format!("criterion {id}"));
        }
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn goldens_check(s: &mut Suite) {
    let start = Instant::now();
    let settings = QpSettings::default();
    let mut bad = Vec::new();
    for g in goldens() {
        let sol = g.instance.solve(&settings).expect("goldens solve");
        let weights_ok = sol.weights.iter().zip(&g.weights).all(|(a, b)| close(*a, *b, 1e-6));
        if !sol.is_optimal() || !close(sol.objective, g.objective, 1e-6) || !weights_ok {
            bad.push(format!("{} got {:.9} {:?}", g.name, sol.objective, sol.weights));
        }
        s.audited.push((sol.problem, sol.qp));
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = bad.is_empty() && secs < 1.0;
    s.report(1, pass, format!("6 goldens, {} off, {secs:.3}s {}", bad.len(), bad.join("; ")), false);
}

fn region_equivalence(s: &mut Suite) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let settings = QpSettings::default();
    let mut worst = 0.0f64;
    let mut failures = 0;
    for _ in 0..200 {
        let n = rng.random_range(2..=7);
        let density = rng.random_range(0.3..=0.8);
        let g = random_digraph(&mut rng, n, density);
        let delta = rng.random_range(0.0..=3.0);
        let anchors: Vec<f64> = (0..g.arc_count()).map(|_| rng.random_range(-3.0..3.0)).collect();
        let build = |r1: bool| {
            let mut sys = ConstraintSystem::new();
            let lengths = (0..g.arc_count()).map(|a| LinExpr::var(sys.add_var(VarRole::Weight(a)))).collect();
            let sg = SymbolicDigraph::new(g.clone(), lengths).unwrap();
            if r1 {
                r1_constraints_enumerated(&mut sys, &sg, delta).unwrap();
            } else {
                r2_constraints(&mut sys, &sg, delta).unwrap();
            }
            QpProblem::new(sys, anchors.iter().copied().enumerate().collect()).unwrap()
        };
        let (p1, p2) = (build(true), build(false));
        let (s1, s2) = (qp::solve_with(&p1, &settings), qp::solve_with(&p2, &settings));
        let gap = (s1.objective - s2.objective).abs();
        worst = worst.max(gap);
        if s1.status != Status::Optimal || s2.status != Status::Optimal || gap > 1e-6 {
            failures += 1;
        }
        s.audited.push((p1, s1));
        s.audited.push((p2, s2));
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = failures == 0 && secs < 60.0;
    s.report(2, pass, format!("200 digraphs, {failures} off, max gap {worst:.2e}, {secs:.2}s"), false);
}

#[derive(Default)]
struct KindTally {
    verify_fail: usize,
    original_passes: usize,
    definition_off: usize,
    formulation_off: usize,
    formulation_verify_fail: usize,
    below_definition: usize,
    solver_not_optimal: usize,
    worst_gap: f64,
}

fn instance_set(kind: Kind) -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ kind as u64);
    (0..PER_KIND).map(|_| random_instance(&mut rng, kind)).collect()
}

fn round_trips(s: &mut Suite) {
    let start = Instant::now();
    let settings = QpSettings::default();
    let mut tallies = Vec::new();
    for kind in Kind::ALL {
        let mut t = KindTally::default();
        for inst in instance_set(kind) {
            let sol = inst.solve(&settings).expect("random instances solve");
            if !sol.is_optimal() {
                t.solver_not_optimal += 1;
                continue;
            }
            if !verify_with(&inst, &sol.weights, 1e-5, Semantics::Definition).unwrap().ok {
                t.verify_fail += 1;
            }
            if !verify_with(&inst, &sol.weights, 1e-5, Semantics::Formulation).unwrap().ok {
                t.formulation_verify_fail += 1;
            }
            if sol.objective > 1e-6 && verify_with(&inst, &inst.weights, 1e-5, Semantics::Definition).unwrap().ok {
                t.original_passes += 1;
            }
            let def = oracle_solve(&inst, Semantics::Definition, &settings).expect("oracle solves");
            let gap = (sol.objective - def.objective).abs();
            t.worst_gap = t.worst_gap.max(gap);
            if gap > 1e-6 {
                t.definition_off += 1;
            }
            if sol.objective < def.objective - 1e-6 {
                t.below_definition += 1;
            }
            let form = oracle_solve(&inst, Semantics::Formulation, &settings).expect("oracle solves");
            if (sol.objective - form.objective).abs() > 1e-6 {
                t.formulation_off += 1;
            }
            s.audited.push((oracle_problem(&inst, Semantics::Definition).unwrap(), def));
            s.audited.push((oracle_problem(&inst, Semantics::Formulation).unwrap(), form));
            s.audited.push((sol.problem, sol.qp));
        }
        tallies.push((kind, t));
    }
    let secs = start.elapsed().as_secs_f64();

    // Failures confined to the definition-level checks of the path kinds are
    // the known gap; everything else must hold for every kind.
    let sound = tallies.iter().all(|(_, t)| {
        t.solver_not_optimal == 0
            && t.verify_fail == 0
            && t.formulation_verify_fail == 0
            && t.formulation_off == 0
            && t.below_definition == 0
    });
    let gap_only = sound
        && tallies
            .iter()
            .filter(|(k, _)| !PATH_KINDS.contains(k))
            .all(|(_, t)| t.original_passes == 0 && t.definition_off == 0);

    let c3 = tallies.iter().all(|(_, t)| t.solver_not_optimal == 0 && t.verify_fail == 0 && t.original_passes == 0);
    let detail3: Vec<String> = tallies
        .iter()
        .map(|(k, t)| format!("{k}: w' fails {}, w passes {}", t.verify_fail, t.original_passes))
        .collect();
    s.report(3, c3 && secs < 120.0, format!("{PER_KIND} per kind, {secs:.1}s; {}", detail3.join(", ")), gap_only);

    let c4 = tallies.iter().all(|(_, t)| t.definition_off == 0);
    let detail4: Vec<String> = tallies
        .iter()
        .map(|(k, t)| {
            format!(
                "{k}: {} off (max {:.1e}), formulation-level {} off",
                t.definition_off, t.worst_gap, t.formulation_off
            )
        })
        .collect();
    s.report(4, c4, detail4.join(", "), gap_only);
}

fn kkt_audit(s: &mut Suite) {
    let mut worst = 0.0f64;
    let mut failures = 0;
    for (p, sol) in &s.audited {
        let r = check_kkt(p, sol);
        worst = worst.max(r.stationarity).max(r.complementarity).max(r.primal_violation);
        if !r.passes(1e-5) {
            failures += 1;
        }
    }
    let n = s.audited.len();
    s.report(5, failures == 0, format!("{n} solutions, {failures} over 1e-5, worst residual {worst:.2e}"), false);
}

fn matching_correspondence(s: &mut Suite) {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 6);
    let mut mismatched = 0;
    let mut cycles = 0;
    for _ in 0..50 {
        let inst = random_matching(&mut rng, 5);
        let Structure::PerfectMatching(g) = &inst.structure else { unreachable!() };
        let w: Vec<f64> = (0..g.edge_count()).map(|_| rng.random_range(-5i32..=5) as f64).collect();
        let m = &inst.designated;
        let mut alt: Vec<f64> = alternating_cycles(g, m)
            .unwrap()
            .iter()
            .map(|c| c.iter().map(|e| if m.contains(e) { w[*e] } else { -w[*e] }).sum())
            .collect();
        let h = build_aux_graph(g, m).unwrap();
        let lengths = h.numeric_lengths(&w);
        let mut hc: Vec<f64> = simple_cycles(&h.digraph(), CYCLE_LIMIT)
            .unwrap()
            .iter()
            .map(|c| c.iter().map(|&a| lengths[a]).sum())
            .collect();
        alt.sort_by(f64::total_cmp);
        hc.sort_by(f64::total_cmp);
        cycles += alt.len();
        if alt != hc {
            mismatched += 1;
        }
    }
    s.report(6, mismatched == 0, format!("50 instances, {cycles} cycles, {mismatched} multisets differ"), false);
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn separable_learning(s: &mut Suite) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 7);
    let theta: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
    let margin = 0.5;
    let examples = separable_tree_stream(&mut rng, &theta, 5, 200, margin);
    let settings = QpSettings::default();
    let (model, log) = train_epochs(&examples, Loss::Hamming, &settings, 50).expect("training runs");
    let epochs = log.last().map_or(0, |r| r.epoch);
    let updates = log.iter().filter(|r| r.status != RoundStatus::Skipped).count();
    let flagged = log.iter().filter(|r| r.flagged).count();
    let clean = log.iter().filter(|r| r.epoch == epochs).all(|r| r.loss == 0.0);
    let replay_errors = examples.iter().filter(|ex| predict(&model, ex).unwrap() != ex.truth).count();
    let hinge: f64 = log.iter().map(|r| r.hinge).sum();
    let max_loss = log.iter().map(|r| r.loss).fold(0.0, f64::max);

    let mut r_diff = 0.0f64;
    let mut r_feat = 0.0f64;
    for ex in &examples {
        let truth = ex.feature_sum(&ex.truth);
        for y in ex.problem.enumerate().unwrap() {
            let phi = ex.feature_sum(&y);
            r_feat = r_feat.max(norm(&phi));
            let diff: Vec<f64> = truth.iter().zip(&phi).map(|(a, b)| a - b).collect();
            r_diff = r_diff.max(norm(&diff));
        }
    }
    let bound = hinge_bound(max_loss, r_diff, norm(&theta), margin);
    let tight = hinge_bound(max_loss, r_feat, norm(&theta), margin);
    let secs = start.elapsed().as_secs_f64();
    let pass = clean && replay_errors == 0 && flagged == 0 && hinge <= bound && secs < 120.0;
    assert!(examples.iter().all(|ex| matches!(ex.problem, Problem::SpanningTree { .. })));
    s.report(
        7,
        pass,
        format!(
            "{updates} updates over {epochs} epochs, replay errors {replay_errors}, flagged {flagged}, \
             hinge {hinge:.3} <= {bound:.1} (feature-norm R: {tight:.1}), A {max_loss}, {secs:.1}s"
        ),
        false,
    );
}

fn complete_digraph(n: usize) -> Digraph {
    let arcs = (0..n).flat_map(|u| (0..n).filter(move |&v| v != u).map(move |v| (u, v))).collect();
    Digraph::new(n, arcs).unwrap()
}

/// `(m, exchange arcs, variables, rows)` for a star tree from node 0.
fn sizes(g: &Digraph) -> (usize, usize, usize, usize) {
    let tree: Vec<usize> = g.arcs().iter().enumerate().filter(|(_, &(u, _))| u == 0).map(|(a, _)| a).collect();
    let (m1, m2) = arborescence_matroids(g, 0);
    let ex = exchange_graph(&m1, &m2, &tree).unwrap().arcs.len();
    let f = formulate_arborescence(g, 0, &tree, 1.0, OptSense::Max).unwrap();
    let st = f.stats();
    (g.arc_count(), ex, st.variables, st.rows)
}

fn sizing(s: &mut Suite) {
    let mut ok = true;
    let mut rows_seen = Vec::new();
    let mut ladder = Vec::new();
    for n in 2..=7 {
        ladder.push(complete_digraph(n));
    }
    // Fixed node count, growing arc set.
    let full = complete_digraph(5);
    let star: Vec<(usize, usize)> = (1..5).map(|v| (0, v)).collect();
    let rest: Vec<(usize, usize)> = full.arcs().iter().copied().filter(|a| !star.contains(a)).collect();
    let mut dense = Vec::new();
    for k in (0..=rest.len()).step_by(4) {
        let mut arcs = star.clone();
        arcs.extend_from_slice(&rest[..k]);
        dense.push(Digraph::new(5, arcs).unwrap());
    }
    for series in [&ladder, &dense] {
        let mut prev = (0, 0);
        for g in series.iter() {
            let (m, ex, vars, rows) = sizes(g);
            ok &= vars == m + ex + m * m && rows == 2 * ex + m * ex + m;
            ok &= vars >= prev.0 && rows >= prev.1;
            ok &= ex <= m * m && rows <= 3 * m * m * g.node_count();
            prev = (vars, rows);
            rows_seen.push(format!("n{} m{m}: {vars}/{rows}", g.node_count()));
        }
    }
    s.report(8, ok, format!("vars = m+x+m^2, rows = 2x+mx+m over {}", rows_seen.join(", ")), false);
}

fn main() {
    let mut s = Suite { unexpected: Vec::new(), audited: Vec::new() };
    goldens_check(&mut s);
    region_equivalence(&mut s);
    round_trips(&mut s);
    kkt_audit(&mut s);
    matching_correspondence(&mut s);
    separable_learning(&mut s);
    sizing(&mut s);
    if !s.unexpected.is_empty() {
        eprintln!("unexpected failures: {}", s.unexpected.join(", "));
        std::process::exit(1);
    }
}
