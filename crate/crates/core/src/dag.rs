//! Role-tagged causal DAGs.
//!
//! Nodes and edges are stored sorted by name, so every derived view (adjustment
//! sets, DOT text) is independent of the order they were listed in.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeRole {
    Treatment,
    Outcome,
    Covariate,
    UnobservedConfounder,
    Instrument,
}

impl NodeRole {
    fn dot_attrs(self) -> &'static str {
        match self {
            NodeRole::Treatment => "shape=diamond",
            NodeRole::Outcome => "shape=doublecircle",
            NodeRole::Covariate => "shape=box",
            NodeRole::UnobservedConfounder => "shape=ellipse, style=dashed",
            NodeRole::Instrument => "shape=triangle",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub name: String,
    pub role: NodeRole,
}

/// Unvalidated description: `{"nodes": [{name, role}], "edges": [[src, dst]]}`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DagSpec {
    pub nodes: Vec<NodeSpec>,
    pub edges: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DagError {
    #[error("cycle detected")]
    Cycle,
    #[error("expected exactly one treatment node, found {0}")]
    TreatmentCount(usize),
    #[error("expected exactly one outcome node, found {0}")]
    OutcomeCount(usize),
    #[error("instrument `{instrument}` has an edge to non-treatment node `{target}`")]
    InstrumentTarget { instrument: String, target: String },
    #[error("unobserved confounder `{confounder}` has an incoming edge from `{source_node}`")]
    ConfounderParent { confounder: String, source_node: String },
    #[error("edge references unknown node `{0}`")]
    UnknownNode(String),
    #[error("node `{0}` is listed twice")]
    DuplicateNode(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CausalDag {
    nodes: Vec<NodeSpec>,
    edges: Vec<(usize, usize)>,
    treatment: usize,
    outcome: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentificationReport {
    pub adjustment_set: Vec<String>,
    pub unobserved_warning: bool,
    pub unobserved: Vec<String>,
}

impl CausalDag {
    pub fn build(spec: &DagSpec) -> Result<Self, DagError> {
        let mut nodes = spec.nodes.clone();
        nodes.sort_by(|a, b| a.name.cmp(&b.name));
        for w in nodes.windows(2) {
            if w[0].name == w[1].name {
                return Err(DagError::DuplicateNode(w[0].name.clone()));
            }
        }
        let index: BTreeMap<&str, usize> = nodes.iter().enumerate().map(|(i, n)| (n.name.as_str(), i)).collect();
        let lookup = |name: &str| index.get(name).copied().ok_or_else(|| DagError::UnknownNode(name.to_string()));
        let mut edges = spec
            .edges
            .iter()
            .map(|(s, t)| Ok((lookup(s)?, lookup(t)?)))
            .collect::<Result<Vec<_>, DagError>>()?;
        edges.sort_unstable();
        edges.dedup();

        let with_role = |r: NodeRole| nodes.iter().enumerate().filter(move |(_, n)| n.role == r).map(|(i, _)| i);
        let treatments: Vec<usize> = with_role(NodeRole::Treatment).collect();
        if treatments.len() != 1 {
            return Err(DagError::TreatmentCount(treatments.len()));
        }
        let outcomes: Vec<usize> = with_role(NodeRole::Outcome).collect();
        if outcomes.len() != 1 {
            return Err(DagError::OutcomeCount(outcomes.len()));
        }
        if has_cycle(nodes.len(), &edges) {
            return Err(DagError::Cycle);
        }
        for &(s, t) in &edges {
            if nodes[s].role == NodeRole::Instrument && nodes[t].role != NodeRole::Treatment {
                return Err(DagError::InstrumentTarget {
                    instrument: nodes[s].name.clone(),
                    target: nodes[t].name.clone(),
                });
            }
            if nodes[t].role == NodeRole::UnobservedConfounder {
                return Err(DagError::ConfounderParent {
                    confounder: nodes[t].name.clone(),
                    source_node: nodes[s].name.clone(),
                });
            }
        }
        Ok(Self { nodes, edges, treatment: treatments[0], outcome: outcomes[0] })
    }

    pub fn nodes(&self) -> &[NodeSpec] {
        &self.nodes
    }

    /// Edges as `(source, target)` names, sorted.
    pub fn edges(&self) -> impl Iterator<Item = (&str, &str)> {
        self.edges.iter().map(|&(s, t)| (self.nodes[s].name.as_str(), self.nodes[t].name.as_str()))
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn treatment(&self) -> &str {
        &self.nodes[self.treatment].name
    }

    pub fn outcome(&self) -> &str {
        &self.nodes[self.outcome].name
    }

    fn has_edge(&self, s: usize, t: usize) -> bool {
        self.edges.binary_search(&(s, t)).is_ok()
    }

    /// Observed common causes: covariates with a direct edge into both the
    /// treatment and the outcome. Warns when an unobserved confounder does the
    /// same.
    pub fn adjustment_set(&self) -> IdentificationReport {
        let common = |i: usize| self.has_edge(i, self.treatment) && self.has_edge(i, self.outcome);
        let pick = |role: NodeRole| -> Vec<String> {
            (0..self.nodes.len())
                .filter(|&i| self.nodes[i].role == role && common(i))
                .map(|i| self.nodes[i].name.clone())
                .collect()
        };
        let unobserved = pick(NodeRole::UnobservedConfounder);
        IdentificationReport {
            adjustment_set: pick(NodeRole::Covariate),
            unobserved_warning: !unobserved.is_empty(),
            unobserved,
        }
    }

    /// DOT digraph with role-specific node shapes, in sorted-name order.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph causal {\n");
        for n in &self.nodes {
            let _ = writeln!(out, "  \"{}\" [{}];", escape(&n.name), n.role.dot_attrs());
        }
        for (s, t) in self.edges() {
            let _ = writeln!(out, "  \"{}\" -> \"{}\";", escape(s), escape(t));
        }
        out.push_str("}\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Kahn's algorithm: a cycle exists iff some node never reaches in-degree 0.
fn has_cycle(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut indeg = vec![0usize; n];
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(s, t) in edges {
        indeg[t] += 1;
        out[s].push(t);
    }
    let mut stack: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
    let mut seen = 0;
    while let Some(v) = stack.pop() {
        seen += 1;
        for &w in &out[v] {
            indeg[w] -= 1;
            if indeg[w] == 0 {
                stack.push(w);
            }
        }
    }
    seen != n
}
