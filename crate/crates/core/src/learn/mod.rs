//! Online structured prediction where every update is a margin-constrained
//! inverse problem in parameter space.

pub mod forward;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{BipartiteGraph, Digraph};
use crate::instance::{BipartiteDoc, DigraphDoc};
use crate::inverse::arborescence::{formulate_arborescence, is_arborescence};
use crate::inverse::matching::{formulate_matching, mate_edges};
use crate::inverse::matroid::formulate_matroid;
use crate::inverse::{Formulation, OptSense};
use crate::matroid::{enumerate_bases, is_basis, GraphicMatroid};
use crate::oracle::{enumerate_arborescences, enumerate_perfect_matchings};
use crate::qp::{self, QpProblem, QpSettings, Status};

/// Structure family of an example.
#[derive(Debug, Clone, PartialEq)]
pub enum Problem {
    /// Maximum spanning forest of an undirected multigraph.
    SpanningTree {
        nodes: usize,
        edges: Vec<(usize, usize)>,
    },
    Arborescence {
        graph: Digraph,
        root: usize,
    },
    PerfectMatching(BipartiteGraph),
}

impl Problem {
    pub fn element_count(&self) -> usize {
        match self {
            Problem::SpanningTree { edges, .. } => edges.len(),
            Problem::Arborescence { graph, .. } => graph.arc_count(),
            Problem::PerfectMatching(g) => g.edge_count(),
        }
    }

    pub fn is_feasible(&self, set: &[usize]) -> bool {
        match self {
            Problem::SpanningTree { nodes, edges } => is_basis(&GraphicMatroid::new(*nodes, edges.clone()), set),
            Problem::Arborescence { graph, root } => is_arborescence(graph, *root, set),
            Problem::PerfectMatching(g) => mate_edges(g, set).is_ok(),
        }
    }

    /// Heaviest feasible structure respecting `fix`.
    pub fn solve(&self, w: &[f64], fix: &forward::Fix) -> Option<Vec<usize>> {
        match self {
            Problem::SpanningTree { nodes, edges } => forward::max_spanning_tree(*nodes, edges, w, fix),
            Problem::Arborescence { graph, root } => forward::max_arborescence(graph, *root, w, fix),
            Problem::PerfectMatching(g) => forward::max_perfect_matching(g, w, fix),
        }
    }

    /// Every feasible structure; for tests and small-scale checks.
    pub fn enumerate(&self) -> Result<Vec<Vec<usize>>> {
        match self {
            Problem::SpanningTree { nodes, edges } => enumerate_bases(&GraphicMatroid::new(*nodes, edges.clone())),
            Problem::Arborescence { graph, root } => enumerate_arborescences(graph, *root),
            Problem::PerfectMatching(g) => enumerate_perfect_matchings(g),
        }
    }

    pub fn formulate(&self, truth: &[usize], delta: f64) -> Result<Formulation> {
        match self {
            Problem::SpanningTree { nodes, edges } => {
                formulate_matroid(&GraphicMatroid::new(*nodes, edges.clone()), truth, delta)
            }
            Problem::Arborescence { graph, root } => formulate_arborescence(graph, *root, truth, delta, OptSense::Max),
            Problem::PerfectMatching(g) => formulate_matching(g, truth, delta),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeaturizedExample {
    pub problem: Problem,
    /// One feature vector per element, all of the same length.
    pub features: Vec<Vec<f64>>,
    /// Sorted element ids of the correct structure.
    pub truth: Vec<usize>,
}

impl FeaturizedExample {
    pub fn new(problem: Problem, features: Vec<Vec<f64>>, truth: Vec<usize>) -> Result<Self> {
        let m = problem.element_count();
        if features.len() != m {
            return Err(Error::Validation(format!("expected {m} feature vectors, got {}", features.len())));
        }
        let dim = features.first().map_or(0, Vec::len);
        if features.iter().any(|f| f.len() != dim) {
            return Err(Error::Validation("feature vectors differ in length".into()));
        }
        if features.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::Validation("features must be finite".into()));
        }
        if !problem.is_feasible(&truth) {
            return Err(Error::Validation("truth is not a feasible structure".into()));
        }
        let mut truth = truth;
        truth.sort_unstable();
        Ok(FeaturizedExample { problem, features, truth })
    }

    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    /// `Φ(y) = Σ_{e∈y} f_e`.
    pub fn feature_sum(&self, set: &[usize]) -> Vec<f64> {
        let mut phi = vec![0.0; self.dim()];
        for &e in set {
            for (p, f) in phi.iter_mut().zip(&self.features[e]) {
                *p += f;
            }
        }
        phi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub theta: Vec<f64>,
}

impl Model {
    pub fn zeros(dim: usize) -> Self {
        Model { theta: vec![0.0; dim] }
    }

    pub fn score(&self, ex: &FeaturizedExample, set: &[usize]) -> f64 {
        set.iter().map(|&e| dot(&self.theta, &ex.features[e])).sum()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `w(e) = θ · f_e`.
pub fn induced_weights(model: &Model, ex: &FeaturizedExample) -> Result<Vec<f64>> {
    if model.theta.len() != ex.dim() {
        return Err(Error::Dimension { expected: ex.dim(), got: model.theta.len() });
    }
    Ok(ex.features.iter().map(|f| dot(&model.theta, f)).collect())
}

fn weight(set: &[usize], w: &[f64]) -> f64 {
    set.iter().map(|&e| w[e]).sum()
}

fn same_value(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

/// Heaviest structure under `w`, lexicographically smallest by sorted ids
/// among ties.
pub fn argmax(problem: &Problem, w: &[f64]) -> Result<Vec<usize>> {
    let none = || Error::Precondition("instance has no feasible structure".into());
    if let Problem::SpanningTree { .. } = problem {
        return problem.solve(w, &[]).ok_or_else(none);
    }
    let best = weight(&problem.solve(w, &[]).ok_or_else(none)?, w);
    let mut fix = vec![None; problem.element_count()];
    for e in 0..fix.len() {
        fix[e] = Some(true);
        let keep = problem.solve(w, &fix).is_some_and(|s| same_value(weight(&s, w), best));
        if !keep {
            fix[e] = Some(false);
        }
    }
    problem.solve(w, &fix).ok_or_else(none)
}

pub fn predict(model: &Model, ex: &FeaturizedExample) -> Result<Vec<usize>> {
    argmax(&ex.problem, &induced_weights(model, ex)?)
}

/// Heaviest structure other than `y`, by partitioning on the first element of
/// `y` that is left out.
pub fn best_other(problem: &Problem, w: &[f64], y: &[usize]) -> Option<Vec<usize>> {
    let mut sorted = y.to_vec();
    sorted.sort_unstable();
    let mut fix = vec![None; problem.element_count()];
    let mut best: Option<(f64, Vec<usize>)> = None;
    for &e in &sorted {
        fix[e] = Some(false);
        if let Some(s) = problem.solve(w, &fix) {
            let v = weight(&s, w);
            if best.as_ref().is_none_or(|(b, _)| v > *b) {
                best = Some((v, s));
            }
        }
        fix[e] = Some(true);
    }
    best.map(|(_, s)| s)
}

/// `|a Δ b|`.
pub fn hamming_loss(a: &[usize], b: &[usize]) -> f64 {
    let (a, b): (std::collections::BTreeSet<_>, std::collections::BTreeSet<_>) =
        (a.iter().collect(), b.iter().collect());
    a.symmetric_difference(&b).count() as f64
}

pub fn zero_one_loss(a: &[usize], b: &[usize]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_unstable();
    b.sort_unstable();
    f64::from(u8::from(a != b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    #[default]
    Hamming,
    ZeroOne,
}

impl Loss {
    pub fn eval(self, truth: &[usize], predicted: &[usize]) -> f64 {
        match self {
            Loss::Hamming => hamming_loss(truth, predicted),
            Loss::ZeroOne => zero_one_loss(truth, predicted),
        }
    }
}

impl FromStr for Loss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hamming" => Ok(Loss::Hamming),
            "zeroone" => Ok(Loss::ZeroOne),
            _ => Err(Error::Parse(format!("unknown loss {s:?}"))),
        }
    }
}

impl fmt::Display for Loss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Loss::Hamming => "hamming",
            Loss::ZeroOne => "zeroone",
        })
    }
}

/// `max(0, δ − (θ·Φ(y) − θ·Φ(y')))` with `y'` the best structure other than
/// the truth; zero when the truth has no competitor.
pub fn hinge_loss(model: &Model, ex: &FeaturizedExample, delta: f64) -> Result<f64> {
    let w = induced_weights(model, ex)?;
    Ok(match best_other(&ex.problem, &w, &ex.truth) {
        Some(other) => (delta - (weight(&ex.truth, &w) - weight(&other, &w))).max(0.0),
        None => 0.0,
    })
}

/// The structural constraint system with every weight replaced by `θ′ · f_e`.
pub fn lifted_problem(model: &Model, ex: &FeaturizedExample, delta: f64) -> Result<QpProblem> {
    if model.theta.len() != ex.dim() {
        return Err(Error::Dimension { expected: ex.dim(), got: model.theta.len() });
    }
    let f = ex.problem.formulate(&ex.truth, delta)?;
    let (system, _) = f.system.lift(&ex.features)?;
    QpProblem::new(system, model.theta.iter().copied().enumerate().collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpdateOutcome {
    pub model: Model,
    pub objective: f64,
    pub status: Status,
}

/// Closest parameters under which the truth beats every competitor by
/// `delta`. On failure the model is returned unchanged.
pub fn update(model: &Model, ex: &FeaturizedExample, delta: f64, settings: &QpSettings) -> Result<UpdateOutcome> {
    let unchanged = |status| UpdateOutcome { model: model.clone(), objective: 0.0, status };
    let problem = match lifted_problem(model, ex, delta) {
        Ok(p) => p,
        Err(Error::Infeasible(msg)) => {
            log::warn!("update is infeasible: {msg}");
            return Ok(unchanged(Status::Infeasible));
        }
        Err(e) => return Err(e),
    };
    let sol = qp::solve_with(&problem, settings);
    if sol.status != Status::Optimal {
        log::warn!("update ended with status {}; model left unchanged", sol.status.as_str());
        return Ok(unchanged(sol.status));
    }
    let theta = sol.values[..model.theta.len()].to_vec();
    Ok(UpdateOutcome { model: Model { theta }, objective: sol.objective, status: Status::Optimal })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RoundStatus {
    /// Zero loss, no program solved.
    Skipped,
    Optimal,
    Infeasible,
    IterationLimit,
}

impl From<Status> for RoundStatus {
    fn from(s: Status) -> Self {
        match s {
            Status::Optimal => RoundStatus::Optimal,
            Status::Infeasible => RoundStatus::Infeasible,
            Status::IterationLimit => RoundStatus::IterationLimit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub epoch: usize,
    pub round: usize,
    pub prediction: Vec<usize>,
    pub loss: f64,
    /// Hinge loss at the pre-update parameters with margin `loss`.
    pub hinge: f64,
    pub update_objective: f64,
    pub status: RoundStatus,
    /// The update failed and the model was kept.
    pub flagged: bool,
}

/// One pass over `examples` starting from `model`.
pub fn run_epoch(
    model: Model,
    examples: &[FeaturizedExample],
    loss: Loss,
    settings: &QpSettings,
    epoch: usize,
) -> Result<(Model, Vec<RoundRecord>)> {
    let mut model = model;
    let mut log = Vec::with_capacity(examples.len());
    for (t, ex) in examples.iter().enumerate() {
        let prediction = predict(&model, ex)?;
        let delta = loss.eval(&ex.truth, &prediction);
        let hinge = hinge_loss(&model, ex, delta)?;
        let mut record = RoundRecord {
            epoch,
            round: t + 1,
            prediction,
            loss: delta,
            hinge,
            update_objective: 0.0,
            status: RoundStatus::Skipped,
            flagged: false,
        };
        if delta > 0.0 {
            let out = update(&model, ex, delta, settings)?;
            record.status = out.status.into();
            record.flagged = out.status != Status::Optimal;
            record.update_objective = out.objective;
            model = out.model;
        }
        log.push(record);
    }
    Ok((model, log))
}

fn common_dim(examples: &[FeaturizedExample]) -> Result<usize> {
    let dim = examples.first().map_or(0, FeaturizedExample::dim);
    if let Some(ex) = examples.iter().find(|e| e.dim() != dim) {
        return Err(Error::Dimension { expected: dim, got: ex.dim() });
    }
    Ok(dim)
}

/// A single online pass from `θ = 0`.
pub fn train_online(
    examples: &[FeaturizedExample],
    loss: Loss,
    settings: &QpSettings,
) -> Result<(Model, Vec<RoundRecord>)> {
    let dim = common_dim(examples)?;
    run_epoch(Model::zeros(dim), examples, loss, settings, 1)
}

/// Repeated passes until one makes no update or `max_epochs` is reached.
pub fn train_epochs(
    examples: &[FeaturizedExample],
    loss: Loss,
    settings: &QpSettings,
    max_epochs: usize,
) -> Result<(Model, Vec<RoundRecord>)> {
    let mut model = Model::zeros(common_dim(examples)?);
    let mut log = Vec::new();
    for epoch in 1..=max_epochs {
        let (next, records) = run_epoch(model, examples, loss, settings, epoch)?;
        model = next;
        let clean = records.iter().all(|r| r.loss == 0.0);
        log.extend(records);
        if clean {
            break;
        }
    }
    Ok((model, log))
}

/// `8 A (R ‖θ*‖ / δ*)²`.
pub fn hinge_bound(max_loss: f64, radius: f64, theta_norm: f64, margin: f64) -> f64 {
    8.0 * max_loss * (radius * theta_norm / margin).powi(2)
}

/// Training-stream kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExampleKind {
    SpanningTree,
    Arborescence,
    PerfectMatching,
}

/// One line of a training stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExampleDoc {
    pub kind: ExampleKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub digraph: Option<DigraphDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bipartite: Option<BipartiteDoc>,
    pub features: Vec<Vec<f64>>,
    pub truth: Vec<usize>,
}

impl ExampleDoc {
    pub fn into_example(self) -> Result<FeaturizedExample> {
        let missing = |f: &str| Error::Validation(format!("example is missing \"{f}\""));
        let digraph = |d: Option<DigraphDoc>| -> Result<Digraph> {
            let d = d.ok_or_else(|| missing("digraph"))?;
            Digraph::new(d.nodes, d.arcs.iter().map(|&[u, v]| (u, v)).collect())
                .map_err(|e| Error::Validation(e.to_string()))
        };
        let problem = match self.kind {
            ExampleKind::SpanningTree => {
                let g = digraph(self.digraph)?;
                Problem::SpanningTree { nodes: g.node_count(), edges: g.arcs().to_vec() }
            }
            ExampleKind::Arborescence => {
                let graph = digraph(self.digraph)?;
                let root = self.root.ok_or_else(|| missing("root"))?;
                if root >= graph.node_count() {
                    return Err(Error::Validation(format!("root {root} outside the graph")));
                }
                Problem::Arborescence { graph, root }
            }
            ExampleKind::PerfectMatching => {
                let b = self.bipartite.ok_or_else(|| missing("bipartite"))?;
                Problem::PerfectMatching(
                    BipartiteGraph::new(b.left, b.right, b.edges.iter().map(|&[l, r]| (l, r)).collect())
                        .map_err(|e| Error::Validation(e.to_string()))?,
                )
            }
        };
        FeaturizedExample::new(problem, self.features, self.truth)
    }

    pub fn from_example(ex: &FeaturizedExample) -> Self {
        let arcs = |e: &[(usize, usize)]| e.iter().map(|&(u, v)| [u, v]).collect();
        let (kind, digraph, root, bipartite) = match &ex.problem {
            Problem::SpanningTree { nodes, edges } => {
                (ExampleKind::SpanningTree, Some(DigraphDoc { nodes: *nodes, arcs: arcs(edges) }), None, None)
            }
            Problem::Arborescence { graph, root } => (
                ExampleKind::Arborescence,
                Some(DigraphDoc { nodes: graph.node_count(), arcs: arcs(graph.arcs()) }),
                Some(*root),
                None,
            ),
            Problem::PerfectMatching(g) => (
                ExampleKind::PerfectMatching,
                None,
                None,
                Some(BipartiteDoc { left: g.left_count(), right: g.right_count(), edges: arcs(g.edges()) }),
            ),
        };
        ExampleDoc { kind, digraph, root, bipartite, features: ex.features.clone(), truth: ex.truth.clone() }
    }
}

/// Parses a JSON-lines training stream; blank lines are ignored.
pub fn load_stream(text: &str) -> Result<Vec<FeaturizedExample>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let doc: ExampleDoc = serde_json::from_str(l).map_err(|e| Error::Parse(format!("line {}: {e}", i + 1)))?;
            doc.into_example()
        })
        .collect()
}

pub fn save_stream(examples: &[FeaturizedExample]) -> String {
    examples
        .iter()
        .map(|ex| serde_json::to_string(&ExampleDoc::from_example(ex)).expect("examples serialize") + "\n")
        .collect()
}

pub fn save_log(records: &[RoundRecord]) -> String {
    records.iter().map(|r| serde_json::to_string(r).expect("records serialize") + "\n").collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_edges() -> FeaturizedExample {
        let problem = Problem::SpanningTree { nodes: 2, edges: vec![(0, 1), (0, 1)] };
        FeaturizedExample::new(problem, vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![1]).unwrap()
    }

    #[test]
    fn induced_weight_is_dot_product() {
        let ex = FeaturizedExample::new(
            Problem::SpanningTree { nodes: 2, edges: vec![(0, 1)] },
            vec![vec![3.0, 5.0]],
            vec![0],
        )
        .unwrap();
        assert_eq!(induced_weights(&Model { theta: vec![1.0, 0.0] }, &ex).unwrap(), vec![3.0]);
        assert_eq!(induced_weights(&Model::zeros(2), &ex).unwrap(), vec![0.0]);
        assert!(induced_weights(&Model::zeros(3), &ex).is_err());
    }

    #[test]
    fn losses() {
        assert_eq!(hamming_loss(&[0, 1], &[0, 1]), 0.0);
        assert_eq!(hamming_loss(&[0, 1], &[2, 3]), 4.0);
        assert_eq!(hamming_loss(&[0, 1], &[0, 2]), 2.0);
        assert_eq!(zero_one_loss(&[1, 0], &[0, 1]), 0.0);
        assert_eq!(zero_one_loss(&[0], &[1]), 1.0);
    }

    #[test]
    fn two_edge_update() {
        let ex = two_edges();
        let out = update(&Model::zeros(2), &ex, 2.0, &QpSettings::default()).unwrap();
        assert_eq!(out.status, Status::Optimal);
        assert!((out.model.theta[0] + 1.0).abs() < 1e-7 && (out.model.theta[1] - 1.0).abs() < 1e-7);
        assert!(hinge_loss(&out.model, &ex, 2.0).unwrap() < 1e-6);
    }

    #[test]
    fn two_edge_hinge_at_zero() {
        assert_eq!(hinge_loss(&Model::zeros(2), &two_edges(), 2.0).unwrap(), 2.0);
    }

    #[test]
    fn two_edge_trace() {
        let ex = two_edges();
        let (model, log) = train_online(&[ex.clone(), ex], Loss::Hamming, &QpSettings::default()).unwrap();
        assert_eq!(log[0].prediction, vec![0]);
        assert_eq!(log[0].loss, 2.0);
        assert_eq!(log[1].loss, 0.0);
        assert_eq!(log[1].status, RoundStatus::Skipped);
        assert!((model.theta[0] + 1.0).abs() < 1e-7 && (model.theta[1] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn unrepresentable_truth_is_flagged() {
        // Identical features cannot separate the two edges.
        let problem = Problem::SpanningTree { nodes: 2, edges: vec![(0, 1), (0, 1)] };
        let ex = FeaturizedExample::new(problem, vec![vec![1.0], vec![1.0]], vec![1]).unwrap();
        let (model, log) = train_online(&[ex], Loss::Hamming, &QpSettings::default()).unwrap();
        assert!(log[0].flagged);
        assert_eq!(model.theta, vec![0.0]);
    }

    #[test]
    fn zero_weights_predict_smallest_ids() {
        let g = Digraph::new(3, vec![(0, 2), (0, 1), (1, 2), (2, 1)]).unwrap();
        let problem = Problem::Arborescence { graph: g, root: 0 };
        assert_eq!(argmax(&problem, &[0.0; 4]).unwrap(), vec![0, 1]);
        let b = BipartiteGraph::new(2, 2, vec![(0, 1), (0, 0), (1, 0), (1, 1)]).unwrap();
        assert_eq!(argmax(&Problem::PerfectMatching(b), &[0.0; 4]).unwrap(), vec![0, 2]);
    }

    #[test]
    fn stream_round_trip() {
        let text = save_stream(&[two_edges()]);
        assert_eq!(load_stream(&text).unwrap(), vec![two_edges()]);
        assert!(load_stream("{\"kind\": \"spanning-tree\"}").is_err());
    }
}
