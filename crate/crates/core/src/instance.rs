//! Instances of every supported kind, their JSON document form, and the
//! solution document.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{normalize_set, BipartiteGraph, Digraph, WeightVector};
use crate::inverse::arborescence::{formulate_arborescence, formulate_st_path, is_arborescence, order_path};
use crate::inverse::flow::{formulate_flow, FlowNetwork};
use crate::inverse::intersection::formulate_intersection;
use crate::inverse::matching::{formulate_matching, mate_edges};
use crate::inverse::matroid::formulate_matroid;
use crate::inverse::sptree::{check_sp_tree, formulate_sp_tree};
use crate::inverse::{Formulation, InverseSolution, OptSense};
use crate::matroid::{is_basis, AnyMatroid, GraphicMatroid, Matroid, PartitionMatroid, UniformMatroid};
use crate::qp::{QpSettings, Status};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Matroid,
    MatroidIntersection,
    Arborescence,
    StPath,
    PerfectMatching,
    MinCostFlow,
    SpTree,
}

impl Kind {
    pub const ALL: [Kind; 7] = [
        Kind::Matroid,
        Kind::MatroidIntersection,
        Kind::Arborescence,
        Kind::StPath,
        Kind::PerfectMatching,
        Kind::MinCostFlow,
        Kind::SpTree,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::Matroid => "matroid",
            Kind::MatroidIntersection => "matroid-intersection",
            Kind::Arborescence => "arborescence",
            Kind::StPath => "st-path",
            Kind::PerfectMatching => "perfect-matching",
            Kind::MinCostFlow => "min-cost-flow",
            Kind::SpTree => "sp-tree",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Kind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| Error::Parse(format!("unknown kind {s:?}")))
    }
}

/// Kind-specific payload.
#[derive(Debug, Clone, PartialEq)]
pub enum Structure {
    Matroid(AnyMatroid),
    Intersection(AnyMatroid, AnyMatroid),
    Arborescence { graph: Digraph, root: usize, sense: OptSense },
    StPath { graph: Digraph, source: usize, sink: usize },
    PerfectMatching(BipartiteGraph),
    MinCostFlow(FlowNetwork),
    SpTree { graph: Digraph, root: usize },
}

impl Structure {
    pub fn kind(&self) -> Kind {
        match self {
            Structure::Matroid(_) => Kind::Matroid,
            Structure::Intersection(..) => Kind::MatroidIntersection,
            Structure::Arborescence { .. } => Kind::Arborescence,
            Structure::StPath { .. } => Kind::StPath,
            Structure::PerfectMatching(_) => Kind::PerfectMatching,
            Structure::MinCostFlow(_) => Kind::MinCostFlow,
            Structure::SpTree { .. } => Kind::SpTree,
        }
    }

    /// Number of weighted elements.
    pub fn element_count(&self) -> usize {
        match self {
            Structure::Matroid(m) | Structure::Intersection(m, _) => m.ground_size(),
            Structure::Arborescence { graph, .. }
            | Structure::StPath { graph, .. }
            | Structure::SpTree { graph, .. } => graph.arc_count(),
            Structure::PerfectMatching(g) => g.edge_count(),
            Structure::MinCostFlow(net) => net.graph().arc_count(),
        }
    }

    /// Whether the designated solution should be heaviest or lightest.
    pub fn sense(&self) -> OptSense {
        match self {
            Structure::Matroid(_) | Structure::Intersection(..) | Structure::PerfectMatching(_) => OptSense::Max,
            Structure::Arborescence { sense, .. } => *sense,
            Structure::StPath { .. } | Structure::MinCostFlow(_) | Structure::SpTree { .. } => OptSense::Min,
        }
    }
}

/// A validated inverse problem: structure, weights, designated solution and margin.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub structure: Structure,
    pub weights: WeightVector,
    /// Sorted element ids of the designated solution.
    pub designated: Vec<usize>,
    pub delta: f64,
}

fn invalid(err: Error) -> Error {
    match err {
        Error::Precondition(m) => Error::Validation(m),
        other => other,
    }
}

impl Instance {
    pub fn new(structure: Structure, weights: WeightVector, designated: Vec<usize>, delta: f64) -> Result<Self> {
        let inst = Instance { structure, weights, designated, delta };
        inst.validate()?;
        let mut inst = inst;
        inst.designated.sort_unstable();
        Ok(inst)
    }

    pub fn kind(&self) -> Kind {
        self.structure.kind()
    }

    pub fn element_count(&self) -> usize {
        self.structure.element_count()
    }

    pub fn sense(&self) -> OptSense {
        self.structure.sense()
    }

    /// Same structure and designated solution under other weights or margin.
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        Instance::new(self.structure.clone(), WeightVector::new(weights)?, self.designated.clone(), self.delta)
    }

    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        Instance::new(self.structure.clone(), self.weights.clone(), self.designated.clone(), delta)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.delta.is_finite() || self.delta < 0.0 {
            return Err(Error::Validation(format!("delta must be finite and non-negative, got {}", self.delta)));
        }
        let m = self.element_count();
        if self.weights.len() != m {
            return Err(Error::Validation(format!("expected {m} weights, got {}", self.weights.len())));
        }
        if normalize_set(&self.designated).is_none() {
            return Err(Error::Validation("designated solution repeats an element".into()));
        }
        if let Some(&e) = self.designated.iter().find(|&&e| e >= m) {
            return Err(Error::Validation(format!("designated element {e} outside 0..{m}")));
        }
        let nonneg = |what: &str| -> Result<()> {
            match self.weights.iter().position(|&x| x < 0.0) {
                Some(a) => Err(Error::Validation(format!("{what} requires non-negative weights; arc {a} is negative"))),
                None => Ok(()),
            }
        };
        match &self.structure {
            Structure::Matroid(mat) => {
                if !is_basis(mat, &self.designated) {
                    return Err(Error::Validation("designated set is not a basis".into()));
                }
            }
            Structure::Intersection(m1, m2) => {
                if m2.ground_size() != m1.ground_size() {
                    return Err(Error::Validation("matroids disagree on the ground set".into()));
                }
                if !is_basis(m1, &self.designated) || !is_basis(m2, &self.designated) {
                    return Err(Error::Validation("designated set is not a common basis".into()));
                }
            }
            Structure::Arborescence { graph, root, .. } => {
                if *root >= graph.node_count() || !is_arborescence(graph, *root, &self.designated) {
                    return Err(Error::Validation(format!("designated arcs are not an arborescence rooted at {root}")));
                }
            }
            Structure::StPath { graph, source, sink } => {
                order_path(graph, *source, *sink, &self.designated).map_err(invalid)?;
                nonneg("st-path")?;
            }
            Structure::PerfectMatching(g) => {
                mate_edges(g, &self.designated).map_err(invalid)?;
            }
            Structure::MinCostFlow(net) => {
                if self.designated != net.support() {
                    return Err(Error::Validation("designated arcs differ from the flow support".into()));
                }
            }
            Structure::SpTree { graph, root } => {
                if *root >= graph.node_count() {
                    return Err(Error::Validation(format!("root {root} outside the graph")));
                }
                check_sp_tree(graph, *root, &self.designated).map_err(invalid)?;
                nonneg("sp-tree")?;
            }
        }
        Ok(())
    }

    pub fn formulate(&self) -> Result<Formulation> {
        let (b, d) = (&self.designated, self.delta);
        match &self.structure {
            Structure::Matroid(m) => formulate_matroid(m, b, d),
            Structure::Intersection(m1, m2) => formulate_intersection(m1, m2, b, d),
            Structure::Arborescence { graph, root, sense } => formulate_arborescence(graph, *root, b, d, *sense),
            Structure::StPath { graph, source, sink } => formulate_st_path(graph, *source, *sink, b, d),
            Structure::PerfectMatching(g) => formulate_matching(g, b, d),
            Structure::MinCostFlow(net) => formulate_flow(net, d),
            Structure::SpTree { graph, root } => formulate_sp_tree(graph, *root, b, d),
        }
    }

    pub fn solve(&self, settings: &QpSettings) -> Result<InverseSolution> {
        let sol = self.formulate()?.solve(&self.weights, settings)?;
        if let Structure::SpTree { .. } = self.structure {
            if let Some(a) = sol.weights.iter().position(|&x| x < 0.0) {
                log::warn!("perturbed weight of arc {a} is negative ({})", sol.weights[a]);
            }
        }
        Ok(sol)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DigraphDoc {
    pub nodes: usize,
    pub arcs: Vec<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BipartiteDoc {
    pub left: usize,
    pub right: usize,
    pub edges: Vec<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionDoc {
    pub classes: Vec<Vec<usize>>,
    pub limits: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformDoc {
    pub rank: usize,
}

/// One matroid of an intersection instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum MatroidDoc {
    Graphic(DigraphDoc),
    Partition(PartitionDoc),
    Uniform(UniformDoc),
}

/// The external instance document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDoc {
    pub kind: Kind,
    pub delta: f64,
    pub weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub designated: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub digraph: Option<DigraphDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bipartite: Option<BipartiteDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacities: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sink: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<PartitionDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uniform: Option<UniformDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matroids: Option<Vec<MatroidDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sense: Option<OptSense>,
}

fn require<T>(field: Option<T>, name: &str, kind: Kind) -> Result<T> {
    field.ok_or_else(|| Error::Validation(format!("{kind} instance is missing \"{name}\"")))
}

fn digraph_from(doc: &DigraphDoc) -> Result<Digraph> {
    Digraph::new(doc.nodes, doc.arcs.iter().map(|&[u, v]| (u, v)).collect()).map_err(invalid)
}

fn digraph_doc(g: &Digraph) -> DigraphDoc {
    DigraphDoc { nodes: g.node_count(), arcs: g.arcs().iter().map(|&(u, v)| [u, v]).collect() }
}

fn matroid_from(doc: &MatroidDoc, ground: usize) -> Result<AnyMatroid> {
    let m = match doc {
        MatroidDoc::Graphic(d) => {
            let g = digraph_from(d)?;
            AnyMatroid::Graphic(GraphicMatroid::from_digraph(&g))
        }
        MatroidDoc::Partition(p) => {
            AnyMatroid::Partition(PartitionMatroid::new(ground, p.classes.clone(), p.limits.clone()).map_err(invalid)?)
        }
        MatroidDoc::Uniform(u) => AnyMatroid::Uniform(UniformMatroid::new(ground, u.rank)),
    };
    if m.ground_size() != ground {
        return Err(Error::Validation(format!("matroid has {} elements but {ground} weights", m.ground_size())));
    }
    Ok(m)
}

fn matroid_doc(m: &AnyMatroid) -> MatroidDoc {
    match m {
        AnyMatroid::Graphic(g) => MatroidDoc::Graphic(DigraphDoc {
            nodes: g.node_count(),
            arcs: g.edges().iter().map(|&(u, v)| [u, v]).collect(),
        }),
        AnyMatroid::Partition(p) => {
            MatroidDoc::Partition(PartitionDoc { classes: p.classes().to_vec(), limits: p.limits().to_vec() })
        }
        AnyMatroid::Uniform(u) => MatroidDoc::Uniform(UniformDoc { rank: u.rank() }),
    }
}

impl InstanceDoc {
    pub fn into_instance(self) -> Result<Instance> {
        let kind = self.kind;
        let weights = WeightVector::new(self.weights).map_err(invalid)?;
        let ground = weights.len();
        let structure = match kind {
            Kind::Matroid => {
                let given: Vec<MatroidDoc> = [
                    self.digraph.map(MatroidDoc::Graphic),
                    self.partition.map(MatroidDoc::Partition),
                    self.uniform.map(MatroidDoc::Uniform),
                ]
                .into_iter()
                .flatten()
                .collect();
                match given.as_slice() {
                    [one] => Structure::Matroid(matroid_from(one, ground)?),
                    _ => {
                        return Err(Error::Validation(
                            "matroid instance needs exactly one of \"digraph\", \"partition\", \"uniform\"".into(),
                        ))
                    }
                }
            }
            Kind::MatroidIntersection => {
                let ms = require(self.matroids, "matroids", kind)?;
                let [a, b] = ms.as_slice() else {
                    return Err(Error::Validation(format!("expected 2 matroids, got {}", ms.len())));
                };
                Structure::Intersection(matroid_from(a, ground)?, matroid_from(b, ground)?)
            }
            Kind::Arborescence => Structure::Arborescence {
                graph: digraph_from(&require(self.digraph, "digraph", kind)?)?,
                root: require(self.root, "root", kind)?,
                sense: self.sense.unwrap_or_default(),
            },
            Kind::StPath => Structure::StPath {
                graph: digraph_from(&require(self.digraph, "digraph", kind)?)?,
                source: require(self.source, "source", kind)?,
                sink: require(self.sink, "sink", kind)?,
            },
            Kind::PerfectMatching => {
                let b = require(self.bipartite, "bipartite", kind)?;
                let g = BipartiteGraph::new(b.left, b.right, b.edges.iter().map(|&[l, r]| (l, r)).collect())
                    .map_err(invalid)?;
                Structure::PerfectMatching(g)
            }
            Kind::MinCostFlow => {
                let graph = digraph_from(&require(self.digraph, "digraph", kind)?)?;
                let net = FlowNetwork::new(
                    graph,
                    require(self.capacities, "capacities", kind)?,
                    require(self.flow, "flow", kind)?,
                    require(self.source, "source", kind)?,
                    require(self.sink, "sink", kind)?,
                )?;
                Structure::MinCostFlow(net)
            }
            Kind::SpTree => Structure::SpTree {
                graph: digraph_from(&require(self.digraph, "digraph", kind)?)?,
                root: require(self.root, "root", kind)?,
            },
        };
        let designated = match (&structure, self.designated) {
            (Structure::MinCostFlow(net), None) => net.support(),
            (_, Some(d)) => d,
            (_, None) => return Err(Error::Validation(format!("{kind} instance is missing \"designated\""))),
        };
        Instance::new(structure, weights, designated, self.delta)
    }

    pub fn from_instance(inst: &Instance) -> Self {
        let mut doc = InstanceDoc {
            kind: inst.kind(),
            delta: inst.delta,
            weights: inst.weights.to_vec(),
            designated: Some(inst.designated.clone()),
            digraph: None,
            bipartite: None,
            capacities: None,
            flow: None,
            root: None,
            source: None,
            sink: None,
            partition: None,
            uniform: None,
            matroids: None,
            sense: None,
        };
        match &inst.structure {
            Structure::Matroid(m) => match matroid_doc(m) {
                MatroidDoc::Graphic(d) => doc.digraph = Some(d),
                MatroidDoc::Partition(p) => doc.partition = Some(p),
                MatroidDoc::Uniform(u) => doc.uniform = Some(u),
            },
            Structure::Intersection(a, b) => doc.matroids = Some(vec![matroid_doc(a), matroid_doc(b)]),
            Structure::Arborescence { graph, root, sense } => {
                doc.digraph = Some(digraph_doc(graph));
                doc.root = Some(*root);
                doc.sense = Some(*sense);
            }
            Structure::StPath { graph, source, sink } => {
                doc.digraph = Some(digraph_doc(graph));
                doc.source = Some(*source);
                doc.sink = Some(*sink);
            }
            Structure::PerfectMatching(g) => {
                doc.bipartite = Some(BipartiteDoc {
                    left: g.left_count(),
                    right: g.right_count(),
                    edges: g.edges().iter().map(|&(l, r)| [l, r]).collect(),
                });
            }
            Structure::MinCostFlow(net) => {
                doc.digraph = Some(digraph_doc(net.graph()));
                doc.capacities = Some(net.capacities().to_vec());
                doc.flow = Some(net.flow().to_vec());
                doc.source = Some(net.source());
                doc.sink = Some(net.sink());
            }
            Structure::SpTree { graph, root } => {
                doc.digraph = Some(digraph_doc(graph));
                doc.root = Some(*root);
            }
        }
        doc
    }
}

pub fn load_instance(bytes: &[u8]) -> Result<Instance> {
    let doc: InstanceDoc = serde_json::from_slice(bytes)?;
    doc.into_instance()
}

pub fn save_instance(inst: &Instance) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(&InstanceDoc::from_instance(inst)).expect("instance documents serialize");
    out.push(b'\n');
    out
}

/// The external solution document. Weights and objective are present only
/// for optimal solves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionDoc {
    pub kind: Kind,
    pub status: Status,
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
    pub original_weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    pub worst_slack: BTreeMap<String, f64>,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
}

impl SolutionDoc {
    pub fn new(inst: &Instance, sol: &InverseSolution) -> Self {
        let optimal = sol.status == Status::Optimal;
        SolutionDoc {
            kind: inst.kind(),
            status: sol.status,
            delta: inst.delta,
            objective: optimal.then_some(sol.objective),
            original_weights: inst.weights.to_vec(),
            weights: optimal.then(|| sol.weights.clone()),
            worst_slack: sol.worst_slack.iter().map(|(f, &s)| (f.name().to_string(), s)).collect(),
            primal_residual: sol.qp.primal_residual,
            dual_residual: sol.qp.dual_residual,
            iterations: sol.qp.iterations,
        }
    }
}

pub fn save_solution(inst: &Instance, sol: &InverseSolution) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(&SolutionDoc::new(inst, sol)).expect("solution documents serialize");
    out.push(b'\n');
    out
}

pub fn load_solution(bytes: &[u8]) -> Result<SolutionDoc> {
    Ok(serde_json::from_slice(bytes)?)
}
