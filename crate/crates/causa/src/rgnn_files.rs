//! JSON model and graph files for the recurrent GNN, and the convergence log.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use causa_core::netgraph::{FeatureGraph, Part, VertexKey};
use causa_core::rgnn::{Labeled, NamedTensor, RgnnConfig, RgnnModel};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::io;

/// `{"config": {...}, "tensors": [{"name", "shape", "data"}]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub config: RgnnConfig,
    pub tensors: Vec<NamedTensor>,
}

impl ModelFile {
    pub fn from_model(model: &RgnnModel) -> Self {
        Self { config: model.config().clone(), tensors: model.tensors() }
    }

    pub fn into_model(self) -> Result<RgnnModel, CliError> {
        Ok(RgnnModel::from_tensors(self.config, &self.tensors)?)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model file serializes");
        s.push('\n');
        s
    }
}

pub fn load_model(path: &Path) -> Result<RgnnModel, CliError> {
    io::read_json::<ModelFile>(path)?.into_model()
}

pub fn save_model(path: &Path, model: &RgnnModel) -> Result<(), CliError> {
    io::write_text(path, &ModelFile::from_model(model).to_json())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VertexEntry {
    pub name: String,
    #[serde(default = "entity")]
    pub part: Part,
    #[serde(default)]
    pub features: Vec<f64>,
}

fn entity() -> Part {
    Part::Entity
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeEntry {
    pub source: String,
    pub target: String,
    #[serde(default)]
    pub features: Vec<f64>,
}

/// A feature graph, optionally with per-vertex targets for training.
/// Vertex names must be unique within the file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    pub vertices: Vec<VertexEntry>,
    #[serde(default)]
    pub edges: Vec<EdgeEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub targets: Option<BTreeMap<String, Vec<f64>>>,
}

impl GraphFile {
    pub fn to_graph(&self) -> Result<FeatureGraph, CliError> {
        let mut keys: BTreeMap<&str, VertexKey> = BTreeMap::new();
        for v in &self.vertices {
            if keys.insert(&v.name, VertexKey { part: v.part, name: v.name.clone() }).is_some() {
                return Err(CliError::Config(format!("graph file lists vertex `{}` twice", v.name)));
            }
        }
        let key = |name: &str| {
            keys.get(name).cloned().ok_or_else(|| CliError::Config(format!("edge references unknown vertex `{name}`")))
        };
        let vertices = self.vertices.iter().map(|v| (keys[v.name.as_str()].clone(), v.features.clone())).collect();
        let edges = self
            .edges
            .iter()
            .map(|e| Ok((key(&e.source)?, key(&e.target)?, e.features.clone())))
            .collect::<Result<Vec<_>, CliError>>()?;
        Ok(FeatureGraph::with_features(vertices, edges)?)
    }

    /// Graph plus targets flattened in the graph's vertex order.
    pub fn to_labeled(&self, output_dim: usize) -> Result<Labeled, CliError> {
        let graph = self.to_graph()?;
        let targets = self.targets.as_ref().ok_or_else(|| CliError::Config("training graph has no `targets`".into()))?;
        let mut flat = Vec::with_capacity(graph.vertex_count() * output_dim);
        for v in graph.vertices() {
            let t = targets
                .get(&v.key.name)
                .ok_or_else(|| CliError::Config(format!("no target for vertex `{}`", v.key.name)))?;
            if t.len() != output_dim {
                return Err(CliError::Config(format!(
                    "target for `{}` has {} values, model outputs {output_dim}",
                    v.key.name,
                    t.len()
                )));
            }
            flat.extend_from_slice(t);
        }
        Ok(Labeled { graph, targets: flat })
    }
}

pub fn load_graph_file(path: &Path) -> Result<GraphFile, CliError> {
    io::read_json(path)
}

/// Tab-separated `k` and max step change, one row per iteration.
pub fn convergence_log(changes: &[f64]) -> String {
    let mut s = String::from("k\tmax_step_change\n");
    for (k, d) in changes.iter().enumerate() {
        let _ = writeln!(s, "{}\t{d:?}", k + 1);
    }
    s
}
