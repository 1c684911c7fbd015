//! Seven-node heterogeneous patient graph and the per-kind input embedding.
//!
//! Five anatomical region nodes hang off two hub nodes: the global CT node
//! (spatial-topology edges carrying centroid offsets) and the clinical node
//! (clinical-context edges). Regions may be absent; hubs never are.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{AutodiffError, BoundParams, ParamId, ParamSet, Tape, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeKind {
    LiverParenchyma,
    FutureLiverRemnant,
    HepaticVeins,
    PortalVeins,
    MetastaticTumors,
    GlobalCt,
    Clinical,
}

impl NodeKind {
    pub const ALL: [NodeKind; 7] = [
        NodeKind::LiverParenchyma,
        NodeKind::FutureLiverRemnant,
        NodeKind::HepaticVeins,
        NodeKind::PortalVeins,
        NodeKind::MetastaticTumors,
        NodeKind::GlobalCt,
        NodeKind::Clinical,
    ];

    pub const ANATOMICAL: [NodeKind; 5] = [
        NodeKind::LiverParenchyma,
        NodeKind::FutureLiverRemnant,
        NodeKind::HepaticVeins,
        NodeKind::PortalVeins,
        NodeKind::MetastaticTumors,
    ];

    pub fn is_anatomical(self) -> bool {
        !matches!(self, NodeKind::GlobalCt | NodeKind::Clinical)
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Region key used in cohort files; `None` for the hub nodes.
    pub fn region_key(self) -> Option<&'static str> {
        match self {
            NodeKind::LiverParenchyma => Some("liver"),
            NodeKind::FutureLiverRemnant => Some("remnant"),
            NodeKind::HepaticVeins => Some("hepatic_veins"),
            NodeKind::PortalVeins => Some("portal_veins"),
            NodeKind::MetastaticTumors => Some("tumors"),
            NodeKind::GlobalCt | NodeKind::Clinical => None,
        }
    }

    pub fn from_region_key(key: &str) -> Option<NodeKind> {
        NodeKind::ANATOMICAL.into_iter().find(|k| k.region_key() == Some(key))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EdgeKind {
    /// GlobalCt -> anatomical region.
    SpatialTopology,
    /// Clinical -> anatomical region.
    ClinicalContext,
}

/// Normalized centroid offset, each component in [-1, 1].
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct EdgeAttr {
    pub offset: [f64; 3],
}

impl EdgeAttr {
    pub fn reversed(self) -> Self {
        Self {
            offset: self.offset.map(|v| -v),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub kind: NodeKind,
    pub features: Vec<f64>,
    pub present: bool,
    /// Normalized centroid; anatomical nodes only.
    pub centroid: Option<[f64; 3]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub source: NodeKind,
    pub target: NodeKind,
    pub kind: EdgeKind,
    pub attr: EdgeAttr,
}

/// Raw feature widths per node family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureSchema {
    pub region_len: usize,
    pub clinical_len: usize,
}

impl FeatureSchema {
    pub fn len_for(&self, kind: NodeKind) -> usize {
        match kind {
            NodeKind::Clinical => self.clinical_len,
            _ => self.region_len,
        }
    }
}

/// One node slot per [`NodeKind`] (in [`NodeKind::ALL`] order) plus logical edges.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatientGraph {
    pub patient_id: String,
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<Edge>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("patient {patient}: no anatomical region present")]
    NoAnatomicalRegion { patient: String },
    #[error("patient {patient}: {kind:?} has {got} features, schema expects {expected}")]
    FeatureLength {
        patient: String,
        kind: NodeKind,
        expected: usize,
        got: usize,
    },
    #[error("patient {patient}: no centroid for {kind:?}")]
    MissingCentroid { patient: String, kind: NodeKind },
    #[error("patient {patient}: non-finite value in {kind:?}")]
    NonFinite { patient: String, kind: NodeKind },
    #[error("no projection for node kind {0:?}")]
    MissingProjection(NodeKind),
    #[error("graph has no present nodes")]
    Empty,
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
}

/// Builds a graph from per-region features. `centroids` may carry a
/// [`NodeKind::GlobalCt`] entry; otherwise the global centroid is the origin.
/// The global CT node's raw features are the mean of the present regions.
pub fn build_patient_graph(
    patient_id: &str,
    schema: &FeatureSchema,
    region_features: &BTreeMap<NodeKind, Vec<f64>>,
    clinical_features: &[f64],
    centroids: &BTreeMap<NodeKind, [f64; 3]>,
) -> Result<PatientGraph, GraphError> {
    let patient = || patient_id.to_string();
    if clinical_features.len() != schema.clinical_len {
        return Err(GraphError::FeatureLength {
            patient: patient(),
            kind: NodeKind::Clinical,
            expected: schema.clinical_len,
            got: clinical_features.len(),
        });
    }
    if clinical_features.iter().any(|v| !v.is_finite()) {
        return Err(GraphError::NonFinite {
            patient: patient(),
            kind: NodeKind::Clinical,
        });
    }
    let present: Vec<NodeKind> = NodeKind::ANATOMICAL
        .into_iter()
        .filter(|k| region_features.contains_key(k))
        .collect();
    if present.is_empty() {
        return Err(GraphError::NoAnatomicalRegion { patient: patient() });
    }
    let global_centroid = centroids.get(&NodeKind::GlobalCt).copied().unwrap_or([0.0; 3]);

    let mut global_features = vec![0.0; schema.region_len];
    let mut nodes = Vec::with_capacity(7);
    let mut edges = Vec::with_capacity(2 * present.len());
    for kind in NodeKind::ANATOMICAL {
        let Some(features) = region_features.get(&kind) else {
            nodes.push(GraphNode {
                kind,
                features: Vec::new(),
                present: false,
                centroid: None,
            });
            continue;
        };
        if features.len() != schema.region_len {
            return Err(GraphError::FeatureLength {
                patient: patient(),
                kind,
                expected: schema.region_len,
                got: features.len(),
            });
        }
        let centroid = *centroids.get(&kind).ok_or_else(|| GraphError::MissingCentroid {
            patient: patient(),
            kind,
        })?;
        if features.iter().chain(&centroid).any(|v| !v.is_finite()) {
            return Err(GraphError::NonFinite {
                patient: patient(),
                kind,
            });
        }
        for (g, f) in global_features.iter_mut().zip(features) {
            *g += f / present.len() as f64;
        }
        let offset = [0, 1, 2].map(|i| (centroid[i] - global_centroid[i]).clamp(-1.0, 1.0));
        edges.push(Edge {
            source: NodeKind::GlobalCt,
            target: kind,
            kind: EdgeKind::SpatialTopology,
            attr: EdgeAttr { offset },
        });
        edges.push(Edge {
            source: NodeKind::Clinical,
            target: kind,
            kind: EdgeKind::ClinicalContext,
            attr: EdgeAttr::default(),
        });
        nodes.push(GraphNode {
            kind,
            features: features.clone(),
            present: true,
            centroid: Some(centroid),
        });
    }
    nodes.push(GraphNode {
        kind: NodeKind::GlobalCt,
        features: global_features,
        present: true,
        centroid: Some(global_centroid),
    });
    nodes.push(GraphNode {
        kind: NodeKind::Clinical,
        features: clinical_features.to_vec(),
        present: true,
        centroid: None,
    });
    Ok(PatientGraph {
        patient_id: patient_id.to_string(),
        nodes,
        edges,
    })
}

impl PatientGraph {
    pub fn node(&self, kind: NodeKind) -> Option<&GraphNode> {
        self.nodes.iter().find(|n| n.kind == kind)
    }

    pub fn is_present(&self, kind: NodeKind) -> bool {
        self.node(kind).is_some_and(|n| n.present)
    }

    /// Present node kinds in row order of the node-state matrix.
    pub fn present_kinds(&self) -> Vec<NodeKind> {
        NodeKind::ALL.into_iter().filter(|&k| self.is_present(k)).collect()
    }

    pub fn present_anatomical_count(&self) -> usize {
        NodeKind::ANATOMICAL.into_iter().filter(|&k| self.is_present(k)).count()
    }

    /// Marks `kind` absent and drops its incident edges.
    pub fn remove_node(&mut self, kind: NodeKind) {
        for node in self.nodes.iter_mut().filter(|n| n.kind == kind) {
            node.present = false;
            node.features.clear();
            node.centroid = None;
        }
        self.edges.retain(|e| e.source != kind && e.target != kind);
    }

    /// Directed arcs in both directions of every logical edge, as
    /// `(source row, target row, attr)` over present-node rows.
    pub fn topology(&self) -> Topology {
        let kinds = self.present_kinds();
        let row = |k: NodeKind| kinds.iter().position(|&x| x == k);
        let mut arcs = Vec::with_capacity(2 * self.edges.len());
        for e in &self.edges {
            if let (Some(s), Some(t)) = (row(e.source), row(e.target)) {
                arcs.push(Arc {
                    source: s,
                    target: t,
                    attr: e.attr,
                });
                arcs.push(Arc {
                    source: t,
                    target: s,
                    attr: e.attr.reversed(),
                });
            }
        }
        Topology { kinds, arcs }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Arc {
    pub source: usize,
    pub target: usize,
    pub attr: EdgeAttr,
}

/// Row-indexed view of a graph used by message passing.
#[derive(Clone, Debug, PartialEq)]
pub struct Topology {
    pub kinds: Vec<NodeKind>,
    pub arcs: Vec<Arc>,
}

impl Topology {
    pub fn node_count(&self) -> usize {
        self.kinds.len()
    }

    /// Incoming arcs per target row.
    pub fn in_degree(&self) -> Vec<usize> {
        let mut deg = vec![0; self.node_count()];
        for a in &self.arcs {
            deg[a.target] += 1;
        }
        deg
    }

    /// Reorders rows by `perm` (new row `i` is old row `perm[i]`).
    pub fn permuted(&self, perm: &[usize]) -> Topology {
        let mut inverse = vec![0; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        Topology {
            kinds: perm.iter().map(|&o| self.kinds[o]).collect(),
            arcs: self
                .arcs
                .iter()
                .map(|a| Arc {
                    source: inverse[a.source],
                    target: inverse[a.target],
                    attr: a.attr,
                })
                .collect(),
        }
    }
}

/// Returns one message per violated graph invariant; empty when well formed.
pub fn validate_graph(graph: &PatientGraph) -> Vec<String> {
    let mut violations = Vec::new();
    for kind in NodeKind::ALL {
        if graph.nodes.iter().filter(|n| n.kind == kind).count() > 1 {
            violations.push(format!("duplicate node kind {kind:?}"));
        }
    }
    if !graph.is_present(NodeKind::Clinical) {
        violations.push("clinical node absent".to_string());
    }
    if !graph.is_present(NodeKind::GlobalCt) {
        violations.push("global ct node absent".to_string());
    }
    if graph.present_anatomical_count() == 0 {
        violations.push("no anatomical node present".to_string());
    }
    if graph
        .edges
        .iter()
        .any(|e| !graph.is_present(e.source) || !graph.is_present(e.target))
    {
        violations.push("dangling edge".to_string());
    }
    for e in &graph.edges {
        let expected_source = match e.kind {
            EdgeKind::SpatialTopology => NodeKind::GlobalCt,
            EdgeKind::ClinicalContext => NodeKind::Clinical,
        };
        if e.source != expected_source || !e.target.is_anatomical() {
            violations.push(format!("malformed {:?} edge {:?} -> {:?}", e.kind, e.source, e.target));
        }
        if e.attr.offset.iter().any(|v| !(-1.0..=1.0).contains(v)) {
            violations.push("edge attribute out of range".to_string());
        }
    }
    for kind in NodeKind::ANATOMICAL {
        if !graph.is_present(kind) {
            continue;
        }
        for (edge_kind, hub, label) in [
            (EdgeKind::SpatialTopology, NodeKind::GlobalCt, "spatial-topology"),
            (EdgeKind::ClinicalContext, NodeKind::Clinical, "clinical-context"),
        ] {
            // An absent hub is already reported.
            if !graph.is_present(hub) {
                continue;
            }
            let n = graph
                .edges
                .iter()
                .filter(|e| e.kind == edge_kind && e.target == kind)
                .count();
            if n != 1 {
                violations.push(format!("{kind:?} has {n} {label} edges, expected 1"));
            }
        }
    }
    violations
}

/// Per-kind linear projections from raw features to the latent width.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbedParams {
    pub latent: usize,
    /// `(weight: len x latent, bias: 1 x latent)` per [`NodeKind::index`].
    pub projections: Vec<Option<(ParamId, ParamId)>>,
}

impl EmbedParams {
    pub fn init(
        params: &mut ParamSet,
        schema: &FeatureSchema,
        latent: usize,
        init: &mut impl FnMut(usize, usize, usize) -> Tensor,
    ) -> Self {
        let projections = NodeKind::ALL
            .into_iter()
            .map(|kind| {
                let len = schema.len_for(kind);
                let w = params.add(format!("embed.{kind:?}.weight"), init(len, latent, len));
                let b = params.add(format!("embed.{kind:?}.bias"), init(1, latent, len));
                Some((w, b))
            })
            .collect();
        Self { latent, projections }
    }
}

/// `H0`: one row per present node, `features * W_kind + b_kind`.
pub fn embed_nodes(
    tape: &mut Tape,
    graph: &PatientGraph,
    embed: &EmbedParams,
    bound: &BoundParams,
) -> Result<Var, GraphError> {
    let mut stacked = Vec::new();
    for kind in graph.present_kinds() {
        let node = graph.node(kind).expect("present kind has a node");
        let (w, b) = embed
            .projections
            .get(kind.index())
            .copied()
            .flatten()
            .ok_or(GraphError::MissingProjection(kind))?;
        let x = tape.constant(Tensor::row_vector(node.features.clone()));
        let row = tape.affine(x, bound[w], bound[b])?;
        stacked.push(row);
    }
    if stacked.is_empty() {
        return Err(GraphError::Empty);
    }
    Ok(tape.stack_rows(&stacked)?)
}
