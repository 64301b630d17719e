//! Undirected feature graphs and their bipartite entity/attribute views.
//!
//! A vertex is identified by its part and name, so an entity and an attribute
//! sharing a label remain distinct vertices. Vertices are kept sorted by
//! `(part, name)` and edges by vertex index, which makes every export
//! deterministic.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    Entity,
    Attribute,
}

impl Part {
    pub fn token(self) -> &'static str {
        match self {
            Part::Entity => "entity",
            Part::Attribute => "attribute",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "entity" => Some(Part::Entity),
            "attribute" => Some(Part::Attribute),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VertexKey {
    pub part: Part,
    pub name: String,
}

impl VertexKey {
    pub fn entity(name: impl Into<String>) -> Self {
        Self { part: Part::Entity, name: name.into() }
    }

    pub fn attribute(name: impl Into<String>) -> Self {
        Self { part: Part::Attribute, name: name.into() }
    }

    fn id(&self) -> String {
        format!("{}:{}", self.part.token(), self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("no records")]
    Empty,
    #[error("record {0} has an empty label")]
    EmptyLabel(usize),
    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),
    #[error("vertex name `{0}` exists in both parts")]
    AmbiguousVertex(String),
    #[error("vertex `{0}` listed twice")]
    DuplicateVertex(String),
    #[error("duplicate edge {0} -- {1}")]
    DuplicateEdge(String, String),
    #[error("self-loop on `{0}`")]
    SelfLoop(String),
    #[error("{what} feature vectors have inconsistent lengths")]
    FeatureDim { what: &'static str },
    #[error("unsupported graph format `{0}` (expected dot or graphml)")]
    UnsupportedFormat(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    pub key: VertexKey,
    pub features: Vec<f64>,
}

/// `G = (V, E)` with optional per-vertex and per-edge feature vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGraph {
    vertices: Vec<Vertex>,
    edges: Vec<(usize, usize)>,
    edge_features: Vec<Vec<f64>>,
    /// Per vertex: `(neighbour, edge index)`, sorted by neighbour.
    adjacency: Vec<Vec<(usize, usize)>>,
    vertex_dim: usize,
    edge_dim: usize,
}

fn uniform_dim<'a>(mut it: impl Iterator<Item = &'a Vec<f64>>, what: &'static str) -> Result<usize, GraphError> {
    let Some(first) = it.next() else { return Ok(0) };
    let d = first.len();
    if it.all(|v| v.len() == d) {
        Ok(d)
    } else {
        Err(GraphError::FeatureDim { what })
    }
}

impl FeatureGraph {
    pub fn empty() -> Self {
        Self { vertices: Vec::new(), edges: Vec::new(), edge_features: Vec::new(), adjacency: Vec::new(), vertex_dim: 0, edge_dim: 0 }
    }

    /// Builds a graph from keyed vertices and edges, each carrying a feature
    /// vector (possibly empty). Feature lengths must agree within vertices and
    /// within edges.
    pub fn with_features(
        vertices: Vec<(VertexKey, Vec<f64>)>,
        edges: Vec<(VertexKey, VertexKey, Vec<f64>)>,
    ) -> Result<Self, GraphError> {
        let mut vertices: Vec<Vertex> = vertices.into_iter().map(|(key, features)| Vertex { key, features }).collect();
        vertices.sort_by(|a, b| a.key.cmp(&b.key));
        for w in vertices.windows(2) {
            if w[0].key == w[1].key {
                return Err(GraphError::DuplicateVertex(w[0].key.name.clone()));
            }
        }
        let vertex_dim = uniform_dim(vertices.iter().map(|v| &v.features), "vertex")?;
        let edge_dim = uniform_dim(edges.iter().map(|e| &e.2), "edge")?;
        let index: BTreeMap<&VertexKey, usize> = vertices.iter().enumerate().map(|(i, v)| (&v.key, i)).collect();
        let mut keyed: Vec<((usize, usize), Vec<f64>)> = Vec::with_capacity(edges.len());
        for (a, b, f) in edges {
            let ia = *index.get(&a).ok_or_else(|| GraphError::UnknownVertex(a.name.clone()))?;
            let ib = *index.get(&b).ok_or_else(|| GraphError::UnknownVertex(b.name.clone()))?;
            if ia == ib {
                return Err(GraphError::SelfLoop(a.name));
            }
            keyed.push(((ia.min(ib), ia.max(ib)), f));
        }
        keyed.sort_by_key(|x| x.0);
        for w in keyed.windows(2) {
            if w[0].0 == w[1].0 {
                let (a, b) = w[0].0;
                return Err(GraphError::DuplicateEdge(vertices[a].key.name.clone(), vertices[b].key.name.clone()));
            }
        }
        let (edges, edge_features): (Vec<(usize, usize)>, Vec<Vec<f64>>) = keyed.into_iter().unzip();
        let mut adjacency = vec![Vec::new(); vertices.len()];
        for (e, &(a, b)) in edges.iter().enumerate() {
            adjacency[a].push((b, e));
            adjacency[b].push((a, e));
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
        }
        Ok(Self { vertices, edges, edge_features, adjacency, vertex_dim, edge_dim })
    }

    /// Featureless graph.
    pub fn new(vertices: Vec<VertexKey>, edges: Vec<(VertexKey, VertexKey)>) -> Result<Self, GraphError> {
        Self::with_features(
            vertices.into_iter().map(|k| (k, Vec::new())).collect(),
            edges.into_iter().map(|(a, b)| (a, b, Vec::new())).collect(),
        )
    }

    /// One entity vertex per distinct first label, one attribute vertex per
    /// distinct second label, one edge per distinct pair.
    pub fn build_bipartite<S: AsRef<str>>(records: &[(S, S)]) -> Result<Self, GraphError> {
        if records.is_empty() {
            return Err(GraphError::Empty);
        }
        let mut vertices = BTreeSet::new();
        let mut edges = BTreeSet::new();
        for (i, (e, a)) in records.iter().enumerate() {
            let (e, a) = (e.as_ref().trim(), a.as_ref().trim());
            if e.is_empty() || a.is_empty() {
                return Err(GraphError::EmptyLabel(i + 1));
            }
            let (ke, ka) = (VertexKey::entity(e), VertexKey::attribute(a));
            vertices.insert(ke.clone());
            vertices.insert(ka.clone());
            edges.insert((ke, ka));
        }
        Self::new(vertices.into_iter().collect(), edges.into_iter().collect())
    }

    /// Number of vertices, `N`.
    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    /// Number of edges, `N_E`.
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    /// Edges as vertex-index pairs `(i, j)` with `i < j`.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_features(&self, edge: usize) -> &[f64] {
        &self.edge_features[edge]
    }

    pub fn vertex_dim(&self) -> usize {
        self.vertex_dim
    }

    pub fn edge_dim(&self) -> usize {
        self.edge_dim
    }

    /// `(neighbour, edge index)` pairs of vertex `i`, sorted by neighbour.
    pub fn neighbors(&self, i: usize) -> &[(usize, usize)] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Dense adjacency matrix `A ∈ {0,1}^{N×N}`.
    pub fn adjacency_matrix(&self) -> Vec<Vec<u8>> {
        let n = self.vertex_count();
        let mut a = vec![vec![0u8; n]; n];
        for &(i, j) in &self.edges {
            a[i][j] = 1;
            a[j][i] = 1;
        }
        a
    }

    pub fn index_of(&self, key: &VertexKey) -> Option<usize> {
        self.vertices.binary_search_by(|v| v.key.cmp(key)).ok()
    }

    /// Looks a vertex up by name alone; fails if the name exists in both parts.
    pub fn find(&self, name: &str) -> Result<usize, GraphError> {
        let hits: Vec<usize> = (0..self.vertices.len()).filter(|&i| self.vertices[i].key.name == name).collect();
        match hits.as_slice() {
            [] => Err(GraphError::UnknownVertex(name.to_string())),
            [i] => Ok(*i),
            _ => Err(GraphError::AmbiguousVertex(name.to_string())),
        }
    }

    /// True when every edge joins an entity to an attribute.
    pub fn is_bipartite_view(&self) -> bool {
        self.edges.iter().all(|&(a, b)| self.vertices[a].key.part != self.vertices[b].key.part)
    }

    pub fn degree_centrality(&self) -> BTreeMap<VertexKey, usize> {
        self.vertices.iter().enumerate().map(|(i, v)| (v.key.clone(), self.degree(i))).collect()
    }

    /// Vertices by decreasing degree, ties broken by `(part, name)`.
    pub fn centrality_ranking(&self) -> Vec<(VertexKey, usize)> {
        let mut ranked: Vec<(VertexKey, usize)> = self.degree_centrality().into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked
    }

    /// Induced subgraph on the vertices within `radius` edges of `name`.
    pub fn neighborhood(&self, name: &str, radius: usize) -> Result<Self, GraphError> {
        let seed = self.find(name)?;
        Ok(self.induced(&self.ball(seed, radius)))
    }

    /// Vertex indices within `radius` hops of `seed` (breadth first), sorted.
    pub fn ball(&self, seed: usize, radius: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.vertex_count()];
        dist[seed] = 0;
        let mut queue = VecDeque::from([seed]);
        while let Some(v) = queue.pop_front() {
            if dist[v] == radius {
                continue;
            }
            for &(w, _) in &self.adjacency[v] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        (0..self.vertex_count()).filter(|&i| dist[i] != usize::MAX).collect()
    }

    /// Subgraph induced by the given (sorted, distinct) vertex indices.
    pub fn induced(&self, keep: &[usize]) -> Self {
        let mut remap = vec![usize::MAX; self.vertex_count()];
        for (new, &old) in keep.iter().enumerate() {
            remap[old] = new;
        }
        let vertices: Vec<Vertex> = keep.iter().map(|&i| self.vertices[i].clone()).collect();
        let mut edges = Vec::new();
        let mut edge_features = Vec::new();
        for (e, &(a, b)) in self.edges.iter().enumerate() {
            if remap[a] != usize::MAX && remap[b] != usize::MAX {
                edges.push((remap[a], remap[b]));
                edge_features.push(self.edge_features[e].clone());
            }
        }
        let mut adjacency = vec![Vec::new(); vertices.len()];
        for (e, &(a, b)) in edges.iter().enumerate() {
            adjacency[a].push((b, e));
            adjacency[b].push((a, e));
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
        }
        let vertex_dim = if vertices.is_empty() { 0 } else { self.vertex_dim };
        let edge_dim = if edges.is_empty() { 0 } else { self.edge_dim };
        Self { vertices, edges, edge_features, adjacency, vertex_dim, edge_dim }
    }

    /// Copy with one vertex's feature vector replaced (same length required).
    pub fn with_vertex_features(&self, i: usize, features: Vec<f64>) -> Result<Self, GraphError> {
        if features.len() != self.vertex_dim && self.vertex_count() > 1 {
            return Err(GraphError::FeatureDim { what: "vertex" });
        }
        let mut g = self.clone();
        g.vertices[i].features = features;
        g.vertex_dim = g.vertices[i].features.len();
        Ok(g)
    }

    pub fn export(&self, format: GraphFormat) -> String {
        match format {
            GraphFormat::Dot => self.to_dot(),
            GraphFormat::GraphMl => self.to_graphml(),
        }
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("graph G {\n");
        for v in &self.vertices {
            let _ = write!(
                out,
                "  \"{}\" [label=\"{}\", part=\"{}\"",
                dot_escape(&v.key.id()),
                dot_escape(&v.key.name),
                v.key.part.token()
            );
            if !v.features.is_empty() {
                let _ = write!(out, ", features=\"{}\"", join_floats(&v.features));
            }
            out.push_str("];\n");
        }
        for (e, &(a, b)) in self.edges.iter().enumerate() {
            let _ = write!(
                out,
                "  \"{}\" -- \"{}\"",
                dot_escape(&self.vertices[a].key.id()),
                dot_escape(&self.vertices[b].key.id())
            );
            if !self.edge_features[e].is_empty() {
                let _ = write!(out, " [features=\"{}\"]", join_floats(&self.edge_features[e]));
            }
            out.push_str(";\n");
        }
        out.push_str("}\n");
        out
    }

    pub fn to_graphml(&self) -> String {
        let mut out = String::from(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
             <graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n  \
             <key id=\"label\" for=\"node\" attr.name=\"label\" attr.type=\"string\"/>\n  \
             <key id=\"part\" for=\"node\" attr.name=\"part\" attr.type=\"string\"/>\n  \
             <key id=\"features\" for=\"all\" attr.name=\"features\" attr.type=\"string\"/>\n  \
             <graph id=\"G\" edgedefault=\"undirected\">\n",
        );
        for v in &self.vertices {
            let _ = writeln!(out, "    <node id=\"{}\">", xml_escape(&v.key.id()));
            let _ = writeln!(out, "      <data key=\"label\">{}</data>", xml_escape(&v.key.name));
            let _ = writeln!(out, "      <data key=\"part\">{}</data>", v.key.part.token());
            if !v.features.is_empty() {
                let _ = writeln!(out, "      <data key=\"features\">{}</data>", join_floats(&v.features));
            }
            out.push_str("    </node>\n");
        }
        for (e, &(a, b)) in self.edges.iter().enumerate() {
            let (sa, sb) = (xml_escape(&self.vertices[a].key.id()), xml_escape(&self.vertices[b].key.id()));
            if self.edge_features[e].is_empty() {
                let _ = writeln!(out, "    <edge source=\"{sa}\" target=\"{sb}\"/>");
            } else {
                let _ = writeln!(out, "    <edge source=\"{sa}\" target=\"{sb}\">");
                let _ = writeln!(out, "      <data key=\"features\">{}</data>", join_floats(&self.edge_features[e]));
                out.push_str("    </edge>\n");
            }
        }
        out.push_str("  </graph>\n</graphml>\n");
        out
    }

    /// Reads the DOT subset written by [`FeatureGraph::to_dot`].
    pub fn parse_dot(text: &str) -> Result<Self, GraphError> {
        let mut vertices: Vec<(VertexKey, Vec<f64>)> = Vec::new();
        let mut by_id: BTreeMap<String, VertexKey> = BTreeMap::new();
        let mut pending: Vec<(usize, String, String, Vec<f64>)> = Vec::new();
        let mut opened = false;
        let mut closed = false;
        for (ln, raw) in text.lines().enumerate() {
            let line_no = ln + 1;
            let line = raw.trim();
            let err = |message: &str| GraphError::Parse { line: line_no, message: message.to_string() };
            if line.is_empty() {
                continue;
            }
            if !opened {
                if line.starts_with("graph") && line.ends_with('{') {
                    opened = true;
                    continue;
                }
                return Err(err("expected `graph G {`"));
            }
            if line == "}" {
                closed = true;
                continue;
            }
            if closed {
                return Err(err("content after closing brace"));
            }
            let body = line.strip_suffix(';').ok_or_else(|| err("missing `;`"))?;
            let mut lex = Lexer { s: body, pos: 0 };
            let first = lex.quoted().ok_or_else(|| err("expected quoted id"))?;
            lex.skip_ws();
            if lex.eat("--") {
                lex.skip_ws();
                let second = lex.quoted().ok_or_else(|| err("expected quoted edge target"))?;
                let attrs = lex.attrs().ok_or_else(|| err("malformed attribute list"))?;
                let features = attr_features(&attrs).ok_or_else(|| err("bad features"))?;
                pending.push((line_no, first, second, features));
            } else {
                let attrs = lex.attrs().ok_or_else(|| err("malformed attribute list"))?;
                let get = |k: &str| attrs.iter().find(|(a, _)| a == k).map(|(_, v)| v.clone());
                let part = get("part").and_then(|p| Part::parse(&p)).ok_or_else(|| err("missing or bad part"))?;
                let name = get("label").ok_or_else(|| err("missing label"))?;
                let features = attr_features(&attrs).ok_or_else(|| err("bad features"))?;
                let key = VertexKey { part, name };
                by_id.insert(first, key.clone());
                vertices.push((key, features));
            }
        }
        if !opened || !closed {
            return Err(GraphError::Parse { line: text.lines().count(), message: "unterminated graph".to_string() });
        }
        let edges = pending
            .into_iter()
            .map(|(line, a, b, f)| {
                let miss = |id: &str| GraphError::Parse { line, message: format!("unknown node id `{id}`") };
                Ok((by_id.get(&a).cloned().ok_or_else(|| miss(&a))?, by_id.get(&b).cloned().ok_or_else(|| miss(&b))?, f))
            })
            .collect::<Result<Vec<_>, GraphError>>()?;
        Self::with_features(vertices, edges)
    }

    /// Reads the GraphML subset written by [`FeatureGraph::to_graphml`].
    pub fn parse_graphml(text: &str) -> Result<Self, GraphError> {
        let mut vertices = Vec::new();
        let mut by_id: BTreeMap<String, VertexKey> = BTreeMap::new();
        let mut raw_edges: Vec<(usize, String, String, Vec<f64>)> = Vec::new();
        let mut current_node: Option<(usize, String, Option<String>, Option<Part>, Vec<f64>)> = None;
        let mut current_edge: Option<(usize, String, String, Vec<f64>)> = None;
        for (ln, raw) in text.lines().enumerate() {
            let line_no = ln + 1;
            let line = raw.trim();
            let err = |message: &str| GraphError::Parse { line: line_no, message: message.to_string() };
            if let Some(rest) = line.strip_prefix("<node ") {
                let id = xml_attr(rest, "id").ok_or_else(|| err("node without id"))?;
                current_node = Some((line_no, id, None, None, Vec::new()));
            } else if line == "</node>" {
                let (l, id, label, part, f) = current_node.take().ok_or_else(|| err("stray </node>"))?;
                let missing = |m: &str| GraphError::Parse { line: l, message: m.to_string() };
                let key = VertexKey {
                    part: part.ok_or_else(|| missing("node without part"))?,
                    name: label.ok_or_else(|| missing("node without label"))?,
                };
                by_id.insert(id, key.clone());
                vertices.push((key, f));
            } else if let Some(rest) = line.strip_prefix("<edge ") {
                let s = xml_attr(rest, "source").ok_or_else(|| err("edge without source"))?;
                let t = xml_attr(rest, "target").ok_or_else(|| err("edge without target"))?;
                if rest.ends_with("/>") {
                    raw_edges.push((line_no, s, t, Vec::new()));
                } else {
                    current_edge = Some((line_no, s, t, Vec::new()));
                }
            } else if line == "</edge>" {
                raw_edges.push(current_edge.take().ok_or_else(|| err("stray </edge>"))?);
            } else if let Some(rest) = line.strip_prefix("<data ") {
                let key = xml_attr(rest, "key").ok_or_else(|| err("data without key"))?;
                let start = rest.find('>').ok_or_else(|| err("malformed data"))? + 1;
                let end = rest.rfind("</data>").ok_or_else(|| err("unterminated data"))?;
                let value = xml_unescape(&rest[start..end]);
                match (key.as_str(), current_node.as_mut(), current_edge.as_mut()) {
                    ("label", Some(n), _) => n.2 = Some(value),
                    ("part", Some(n), _) => n.3 = Some(Part::parse(&value).ok_or_else(|| err("bad part"))?),
                    ("features", Some(n), _) => n.4 = parse_floats(&value).ok_or_else(|| err("bad features"))?,
                    ("features", None, Some(e)) => e.3 = parse_floats(&value).ok_or_else(|| err("bad features"))?,
                    _ => {}
                }
            }
        }
        let edges = raw_edges
            .into_iter()
            .map(|(line, a, b, f)| {
                let miss = |id: &str| GraphError::Parse { line, message: format!("unknown node id `{id}`") };
                Ok((by_id.get(&a).cloned().ok_or_else(|| miss(&a))?, by_id.get(&b).cloned().ok_or_else(|| miss(&b))?, f))
            })
            .collect::<Result<Vec<_>, GraphError>>()?;
        Self::with_features(vertices, edges)
    }

    pub fn parse(text: &str, format: GraphFormat) -> Result<Self, GraphError> {
        match format {
            GraphFormat::Dot => Self::parse_dot(text),
            GraphFormat::GraphMl => Self::parse_graphml(text),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphFormat {
    Dot,
    #[serde(rename = "graphml")]
    GraphMl,
}

impl core::str::FromStr for GraphFormat {
    type Err = GraphError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dot" => Ok(GraphFormat::Dot),
            "graphml" => Ok(GraphFormat::GraphMl),
            other => Err(GraphError::UnsupportedFormat(other.to_string())),
        }
    }
}

fn join_floats(xs: &[f64]) -> String {
    let mut s = String::new();
    for (i, x) in xs.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{x:?}");
    }
    s
}

fn parse_floats(s: &str) -> Option<Vec<f64>> {
    s.split_whitespace().map(|t| t.parse::<f64>().ok()).collect()
}

fn attr_features(attrs: &[(String, String)]) -> Option<Vec<f64>> {
    match attrs.iter().find(|(k, _)| k == "features") {
        Some((_, v)) => parse_floats(v),
        None => Some(Vec::new()),
    }
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn xml_unescape(s: &str) -> String {
    s.replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&quot;", "\"")
        .replace("&apos;", "'")
        .replace("&amp;", "&")
}

fn xml_attr(tag: &str, name: &str) -> Option<String> {
    let pat = format!("{name}=\"");
    let start = tag.find(&pat)? + pat.len();
    let len = tag[start..].find('"')?;
    Some(xml_unescape(&tag[start..start + len]))
}

struct Lexer<'a> {
    s: &'a str,
    pos: usize,
}

impl Lexer<'_> {
    fn skip_ws(&mut self) {
        while self.s[self.pos..].starts_with(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, tok: &str) -> bool {
        if self.s[self.pos..].starts_with(tok) {
            self.pos += tok.len();
            true
        } else {
            false
        }
    }

    fn quoted(&mut self) -> Option<String> {
        self.skip_ws();
        if !self.eat("\"") {
            return None;
        }
        let mut out = String::new();
        let mut chars = self.s[self.pos..].char_indices();
        while let Some((i, c)) = chars.next() {
            match c {
                '\\' => {
                    let (_, n) = chars.next()?;
                    out.push(n);
                }
                '"' => {
                    self.pos += i + 1;
                    return Some(out);
                }
                c => out.push(c),
            }
        }
        None
    }

    fn ident(&mut self) -> Option<String> {
        self.skip_ws();
        let rest = &self.s[self.pos..];
        let len = rest.find(|c: char| !(c.is_alphanumeric() || c == '_')).unwrap_or(rest.len());
        if len == 0 {
            return None;
        }
        self.pos += len;
        Some(rest[..len].to_string())
    }

    /// Optional `[k="v", ...]`; must consume the rest of the input.
    fn attrs(&mut self) -> Option<Vec<(String, String)>> {
        self.skip_ws();
        let mut out = Vec::new();
        if self.eat("[") {
            loop {
                self.skip_ws();
                if self.eat("]") {
                    break;
                }
                let k = self.ident()?;
                self.skip_ws();
                if !self.eat("=") {
                    return None;
                }
                let v = self.quoted()?;
                out.push((k, v));
                self.skip_ws();
                self.eat(",");
            }
        }
        self.skip_ws();
        (self.pos == self.s.len()).then_some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> FeatureGraph {
        FeatureGraph::build_bipartite(&[("A", "c1"), ("A", "c2"), ("B", "c1")]).unwrap()
    }

    #[test]
    fn bipartite_counts() {
        let g = fixture();
        assert_eq!((g.vertex_count(), g.edge_count()), (4, 3));
        assert!(g.is_bipartite_view());
        let dup = FeatureGraph::build_bipartite(&[("A", "c1"), ("A", "c1")]).unwrap();
        assert_eq!((dup.vertex_count(), dup.edge_count()), (2, 1));
        assert_eq!(FeatureGraph::build_bipartite::<&str>(&[]), Err(GraphError::Empty));
        assert_eq!(FeatureGraph::build_bipartite(&[("A", " ")]), Err(GraphError::EmptyLabel(1)));
    }

    #[test]
    fn degrees_by_hand() {
        let d = fixture().degree_centrality();
        assert_eq!(d[&VertexKey::entity("A")], 2);
        assert_eq!(d[&VertexKey::entity("B")], 1);
        assert_eq!(d[&VertexKey::attribute("c1")], 2);
        assert_eq!(d[&VertexKey::attribute("c2")], 1);
        assert!(FeatureGraph::empty().degree_centrality().is_empty());
        let one = FeatureGraph::build_bipartite(&[("A", "c1")]).unwrap();
        assert!(one.degree_centrality().values().all(|&d| d == 1));
    }

    #[test]
    fn adjacency_matches_edge_count() {
        let g = fixture();
        let a = g.adjacency_matrix();
        let ones: usize = a.iter().flatten().map(|&x| x as usize).sum();
        assert_eq!(ones, 2 * g.edge_count());
    }

    #[test]
    fn neighborhood_examples() {
        let g = fixture();
        let n1 = g.neighborhood("A", 1).unwrap();
        let names: Vec<&str> = n1.vertices().iter().map(|v| v.key.name.as_str()).collect();
        assert_eq!(names, vec!["A", "c1", "c2"]);
        assert_eq!(n1.edge_count(), 2);
        let n0 = g.neighborhood("A", 0).unwrap();
        assert_eq!((n0.vertex_count(), n0.edge_count()), (1, 0));
        assert_eq!(g.neighborhood("A", 10).unwrap(), g);
        assert_eq!(g.neighborhood("Z", 1), Err(GraphError::UnknownVertex("Z".into())));
    }

    #[test]
    fn same_label_in_both_parts() {
        let g = FeatureGraph::build_bipartite(&[("X", "X"), ("Y", "X")]).unwrap();
        assert_eq!(g.vertex_count(), 3);
        assert_eq!(g.find("X"), Err(GraphError::AmbiguousVertex("X".into())));
        let back = FeatureGraph::parse_dot(&g.to_dot()).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn empty_dot() {
        assert_eq!(FeatureGraph::empty().to_dot(), "graph G {\n}\n");
        assert_eq!(FeatureGraph::parse_dot("graph G {\n}\n").unwrap(), FeatureGraph::empty());
    }

    #[test]
    fn dot_layout_and_round_trip() {
        let g = fixture();
        let text = g.to_dot();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2 + 4 + 3);
        assert_eq!(lines[1], "  \"entity:A\" [label=\"A\", part=\"entity\"];");
        assert_eq!(lines[5], "  \"entity:A\" -- \"attribute:c1\";");
        assert_eq!(FeatureGraph::parse_dot(&text).unwrap(), g);
        assert_eq!(FeatureGraph::parse_graphml(&g.to_graphml()).unwrap(), g);
    }

    #[test]
    fn features_survive_round_trip() {
        let g = FeatureGraph::with_features(
            vec![(VertexKey::entity("a\"q"), vec![1.5, -2.0]), (VertexKey::entity("b<&>"), vec![0.1, 3e-9])],
            vec![(VertexKey::entity("a\"q"), VertexKey::entity("b<&>"), vec![7.0])],
        )
        .unwrap();
        assert_eq!(FeatureGraph::parse_dot(&g.to_dot()).unwrap(), g);
        assert_eq!(FeatureGraph::parse_graphml(&g.to_graphml()).unwrap(), g);
    }

    #[test]
    fn construction_errors() {
        let a = VertexKey::entity("a");
        let b = VertexKey::entity("b");
        assert_eq!(FeatureGraph::new(vec![a.clone()], vec![(a.clone(), a.clone())]), Err(GraphError::SelfLoop("a".into())));
        assert!(matches!(
            FeatureGraph::new(vec![a.clone(), b.clone()], vec![(a.clone(), b.clone()), (b.clone(), a.clone())]),
            Err(GraphError::DuplicateEdge(..))
        ));
        assert!(matches!("svg".parse::<GraphFormat>(), Err(GraphError::UnsupportedFormat(_))));
    }
}
