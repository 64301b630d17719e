//! Recurrent graph neural network with a certified contraction.
//!
//! The transition `f` is a two-layer perceptron applied to
//! `z = [v_i, e_ij, v_j, h_j]` and summed over the neighbours of `i`. The
//! readout `g` is a stack of dense layers applied to each converged state.
//! Parameters are stored as one list of dense layers: `f.1`, `f.2`, then the
//! readout layers in order.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netgraph::FeatureGraph;

pub const DEFAULT_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 10_000;
pub const DEFAULT_UNROLL: usize = 10;
pub const DEFAULT_CONTRACTION: f64 = 0.9;
pub const LOSS_SLACK: f64 = 1e-6;
pub const MAX_HALVINGS: usize = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RgnnError {
    #[error("{what} feature dimension {found} does not match the model's {expected}")]
    FeatureDim { what: &'static str, expected: usize, found: usize },
    #[error("state set holds {found} states of dim {found_dim}, expected {expected} of dim {expected_dim}")]
    StateShape { expected: usize, expected_dim: usize, found: usize, found_dim: usize },
    #[error("no convergence after {max_iter} iterations (last step change {last_change:e}); contraction certificate violated?")]
    NotConverged { max_iter: usize, last_change: f64 },
    #[error("contraction target must lie in (0, 1), got {0}")]
    ContractionTarget(f64),
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("tensor `{name}`: {message}")]
    Tensor { name: String, message: String },
    #[error("targets hold {found} values, expected {expected}")]
    TargetShape { expected: usize, found: usize },
    #[error("non-finite {0}")]
    NonFinite(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, u: f64) -> f64 {
        match self {
            Activation::Tanh => libm::tanh(u),
            Activation::Identity => u,
        }
    }

    fn slope(self, u: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = libm::tanh(u);
                1.0 - t * t
            }
            Activation::Identity => 1.0,
        }
    }
}

/// `y = act(W x + b)` with `W` stored row-major, `rows × cols`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub rows: usize,
    pub cols: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub act: Activation,
}

impl Dense {
    pub fn zeros(rows: usize, cols: usize, act: Activation) -> Self {
        Self { rows, cols, w: vec![0.0; rows * cols], b: vec![0.0; rows], act }
    }

    fn pre(&self, x: &[f64], u: &mut [f64]) {
        for (r, u) in u.iter_mut().enumerate() {
            let row = &self.w[r * self.cols..(r + 1) * self.cols];
            *u = self.b[r] + row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>();
        }
    }

    fn forward(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut u = vec![0.0; self.rows];
        self.pre(x, &mut u);
        let y = u.iter().map(|&u| self.act.apply(u)).collect();
        (u, y)
    }

    /// Accumulates parameter gradients and returns `dL/dx`.
    fn backward(&self, x: &[f64], u: &[f64], dy: &[f64], grad: &mut LayerGrad) -> Vec<f64> {
        let mut dx = vec![0.0; self.cols];
        for r in 0..self.rows {
            let du = dy[r] * self.act.slope(u[r]);
            if du == 0.0 {
                continue;
            }
            grad.b[r] += du;
            let row = &self.w[r * self.cols..(r + 1) * self.cols];
            let grow = &mut grad.w[r * self.cols..(r + 1) * self.cols];
            for c in 0..self.cols {
                grow[c] += du * x[c];
                dx[c] += du * row[c];
            }
        }
        dx
    }

    /// Max-row-sum norm of the column block `cols`.
    fn row_sum_norm(&self, cols: core::ops::Range<usize>) -> f64 {
        (0..self.rows)
            .map(|r| self.w[r * self.cols + cols.start..r * self.cols + cols.end].iter().map(|w| w.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
struct LayerGrad {
    w: Vec<f64>,
    b: Vec<f64>,
}

/// Output size and activation of one readout layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReadoutLayer {
    pub out: usize,
    #[serde(default)]
    pub act: Activation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RgnnConfig {
    #[serde(default)]
    pub vertex_dim: usize,
    #[serde(default)]
    pub edge_dim: usize,
    pub state_dim: usize,
    pub hidden_dim: usize,
    #[serde(default)]
    pub hidden_activation: Activation,
    /// Empty means `g` is the identity.
    #[serde(default)]
    pub readout: Vec<ReadoutLayer>,
    #[serde(default = "default_contraction")]
    pub contraction_target: f64,
}

fn default_contraction() -> f64 {
    DEFAULT_CONTRACTION
}

impl RgnnConfig {
    /// Length of the transition input `[v_i, e_ij, v_j, h_j]`.
    pub fn input_dim(&self) -> usize {
        2 * self.vertex_dim + self.edge_dim + self.state_dim
    }

    fn h_block(&self) -> core::ops::Range<usize> {
        let start = 2 * self.vertex_dim + self.edge_dim;
        start..start + self.state_dim
    }

    pub fn output_dim(&self) -> usize {
        self.readout.last().map_or(self.state_dim, |l| l.out)
    }

    /// `(name, rows, cols, activation)` of every layer in parameter order.
    fn layer_shapes(&self) -> Vec<(String, usize, usize, Activation)> {
        let mut shapes = vec![
            ("f.1".to_string(), self.hidden_dim, self.input_dim(), self.hidden_activation),
            ("f.2".to_string(), self.state_dim, self.hidden_dim, Activation::Identity),
        ];
        let mut cols = self.state_dim;
        for (i, l) in self.readout.iter().enumerate() {
            shapes.push((format!("g.{}", i + 1), l.out, cols, l.act));
            cols = l.out;
        }
        shapes
    }

    fn validate(&self) -> Result<(), RgnnError> {
        if self.state_dim == 0 {
            return Err(RgnnError::Config("state_dim must be at least 1".to_string()));
        }
        if self.hidden_dim == 0 {
            return Err(RgnnError::Config("hidden_dim must be at least 1".to_string()));
        }
        if self.readout.iter().any(|l| l.out == 0) {
            return Err(RgnnError::Config("readout layers need at least one output".to_string()));
        }
        if !(self.contraction_target > 0.0 && self.contraction_target < 1.0) {
            return Err(RgnnError::ContractionTarget(self.contraction_target));
        }
        Ok(())
    }
}

/// A named parameter tensor; matrices have shape `[rows, cols]`, biases `[rows]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// Bound on `f`'s Lipschitz constant in `h` before any rescaling.
    pub lipschitz: f64,
    pub max_degree: usize,
    /// Factor applied to the output-layer weights of `f` (1 when none was needed).
    pub scale: f64,
    /// Post-scaling `L × max_degree`.
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RgnnModel {
    config: RgnnConfig,
    layers: Vec<Dense>,
    certificate: Option<Certificate>,
}

/// Per-vertex hidden states `h_i^k`, stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSet {
    pub dim: usize,
    pub k: usize,
    pub data: Vec<f64>,
}

impl StateSet {
    pub fn filled(n: usize, dim: usize, value: f64) -> Self {
        Self { dim, k: 0, data: vec![value; n * dim] }
    }

    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Largest absolute entry-wise difference.
    pub fn max_change(&self, other: &StateSet) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// Zero states for every vertex of `graph`, `k = 0`.
pub fn init_states(graph: &FeatureGraph, state_dim: usize) -> StateSet {
    StateSet::filled(graph.vertex_count(), state_dim, 0.0)
}

/// Converged states plus the step change recorded at every iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPoint {
    pub states: StateSet,
    pub log: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub epochs: usize,
    pub learning_rate: f64,
    pub unroll: usize,
    pub tolerance: f64,
    pub max_iter: usize,
    /// Tensor names (see [`RgnnModel::tensors`]) held fixed.
    pub frozen: Vec<String>,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            epochs: 100,
            learning_rate: 0.1,
            unroll: DEFAULT_UNROLL,
            tolerance: DEFAULT_TOLERANCE,
            max_iter: DEFAULT_MAX_ITER,
            frozen: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub model: RgnnModel,
    /// Training loss at the start of each epoch, then the final loss.
    pub losses: Vec<f64>,
    pub learning_rate: f64,
    pub halvings: usize,
    pub stopped_early: bool,
}

/// A graph with flattened per-vertex targets (`N × output_dim`).
#[derive(Debug, Clone, PartialEq)]
pub struct Labeled {
    pub graph: FeatureGraph,
    pub targets: Vec<f64>,
}

impl RgnnModel {
    /// Model with all parameters zero.
    pub fn zeros(config: RgnnConfig) -> Result<Self, RgnnError> {
        config.validate()?;
        let layers = config.layer_shapes().into_iter().map(|(_, r, c, a)| Dense::zeros(r, c, a)).collect();
        Ok(Self { config, layers, certificate: None })
    }

    /// Parameters drawn uniformly from `[-scale, scale]`.
    pub fn random<R: Rng + ?Sized>(config: RgnnConfig, scale: f64, rng: &mut R) -> Result<Self, RgnnError> {
        let mut m = Self::zeros(config)?;
        for l in &mut m.layers {
            for v in l.w.iter_mut().chain(l.b.iter_mut()) {
                *v = rng.random_range(-scale..=scale);
            }
        }
        Ok(m)
    }

    /// Builds a model from named tensors; every tensor of the configuration
    /// must be present exactly once with the right shape.
    pub fn from_tensors(config: RgnnConfig, tensors: &[NamedTensor]) -> Result<Self, RgnnError> {
        let mut m = Self::zeros(config)?;
        let names = m.tensor_names();
        for t in tensors {
            if !names.contains(&t.name) {
                return Err(RgnnError::Tensor { name: t.name.clone(), message: "unknown tensor".to_string() });
            }
        }
        let shapes = m.config.layer_shapes();
        for (l, (name, rows, cols, _)) in m.layers.iter_mut().zip(shapes) {
            for (suffix, shape, dest) in [(".w", vec![rows, cols], &mut l.w), (".b", vec![rows], &mut l.b)] {
                let full = format!("{name}{suffix}");
                let mut hits = tensors.iter().filter(|t| t.name == full);
                let t = hits
                    .next()
                    .ok_or_else(|| RgnnError::Tensor { name: full.clone(), message: "missing".to_string() })?;
                if hits.next().is_some() {
                    return Err(RgnnError::Tensor { name: full, message: "listed twice".to_string() });
                }
                if t.shape != shape || t.data.len() != dest.len() {
                    return Err(RgnnError::Tensor {
                        name: full,
                        message: format!("shape {:?} with {} values, expected {:?}", t.shape, t.data.len(), shape),
                    });
                }
                if t.data.iter().any(|v| !v.is_finite()) {
                    return Err(RgnnError::Tensor { name: full, message: "non-finite entry".to_string() });
                }
                dest.copy_from_slice(&t.data);
            }
        }
        Ok(m)
    }

    pub fn config(&self) -> &RgnnConfig {
        &self.config
    }

    pub fn certificate(&self) -> Option<&Certificate> {
        self.certificate.as_ref()
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        self.certificate = None;
        &mut self.layers
    }

    fn f1(&self) -> &Dense {
        &self.layers[0]
    }

    fn f2(&self) -> &Dense {
        &self.layers[1]
    }

    fn readout_layers(&self) -> &[Dense] {
        &self.layers[2..]
    }

    /// Names in parameter order: `f.1.w, f.1.b, f.2.w, f.2.b, g.1.w, ...`.
    pub fn tensor_names(&self) -> Vec<String> {
        self.config
            .layer_shapes()
            .into_iter()
            .flat_map(|(n, ..)| [format!("{n}.w"), format!("{n}.b")])
            .collect()
    }

    pub fn tensors(&self) -> Vec<NamedTensor> {
        self.config
            .layer_shapes()
            .into_iter()
            .zip(&self.layers)
            .flat_map(|((n, rows, cols, _), l)| {
                [
                    NamedTensor { name: format!("{n}.w"), shape: vec![rows, cols], data: l.w.clone() },
                    NamedTensor { name: format!("{n}.b"), shape: vec![rows], data: l.b.clone() },
                ]
            })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn params(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.w.iter().chain(&l.b).copied()).collect()
    }

    /// Overwrites all parameters from a flat vector in [`RgnnModel::params`] order.
    pub fn set_params(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.param_count(), "parameter vector length");
        let mut it = flat.iter();
        for l in &mut self.layers {
            for v in l.w.iter_mut().chain(l.b.iter_mut()) {
                *v = *it.next().unwrap();
            }
        }
        self.certificate = None;
    }

    /// Flat mask (true = trainable) for the given frozen tensor names.
    pub fn trainable_mask(&self, frozen: &[String]) -> Result<Vec<bool>, RgnnError> {
        let names = self.tensor_names();
        for f in frozen {
            if !names.contains(f) {
                return Err(RgnnError::Tensor { name: f.clone(), message: "unknown tensor".to_string() });
            }
        }
        let mut mask = Vec::with_capacity(self.param_count());
        for (l, pair) in self.layers.iter().zip(names.chunks(2)) {
            mask.extend(core::iter::repeat_n(!frozen.contains(&pair[0]), l.w.len()));
            mask.extend(core::iter::repeat_n(!frozen.contains(&pair[1]), l.b.len()));
        }
        Ok(mask)
    }

    /// Upper bound on the Lipschitz constant of `f` in its `h` input:
    /// `‖W₂‖∞ · ‖W₁[:, h]‖∞` (the hidden activation has slope at most 1).
    pub fn lipschitz_bound(&self) -> f64 {
        self.f2().row_sum_norm(0..self.config.hidden_dim) * self.f1().row_sum_norm(self.config.h_block())
    }

    /// Rescales the output weights of `f` so that `L × max_degree` does not
    /// exceed the contraction target. A graph of max degree 0 leaves the model
    /// unchanged.
    pub fn certify_for_degree(&self, max_degree: usize) -> Self {
        let c = self.config.contraction_target;
        let lipschitz = self.lipschitz_bound();
        let raw = lipschitz * max_degree as f64;
        let mut m = self.clone();
        let scale = if raw > c { c / raw } else { 1.0 };
        if scale != 1.0 {
            for w in &mut m.layers[1].w {
                *w *= scale;
            }
        }
        let bound = m.lipschitz_bound() * max_degree as f64;
        m.certificate = Some(Certificate { lipschitz, max_degree, scale, bound });
        m
    }

    pub fn certify_contraction(&self, graph: &FeatureGraph) -> Self {
        self.certify_for_degree(graph.max_degree())
    }

    fn check_graph(&self, graph: &FeatureGraph) -> Result<(), RgnnError> {
        if graph.vertex_count() > 0 && graph.vertex_dim() != self.config.vertex_dim {
            return Err(RgnnError::FeatureDim { what: "vertex", expected: self.config.vertex_dim, found: graph.vertex_dim() });
        }
        if graph.edge_count() > 0 && graph.edge_dim() != self.config.edge_dim {
            return Err(RgnnError::FeatureDim { what: "edge", expected: self.config.edge_dim, found: graph.edge_dim() });
        }
        Ok(())
    }

    fn check_states(&self, graph: &FeatureGraph, states: &StateSet) -> Result<(), RgnnError> {
        if states.dim != self.config.state_dim || states.data.len() != graph.vertex_count() * self.config.state_dim {
            return Err(RgnnError::StateShape {
                expected: graph.vertex_count(),
                expected_dim: self.config.state_dim,
                found: states.len(),
                found_dim: states.dim,
            });
        }
        Ok(())
    }

    fn edge_input(&self, graph: &FeatureGraph, i: usize, j: usize, e: usize, h: &StateSet, z: &mut Vec<f64>) {
        z.clear();
        z.extend_from_slice(&graph.vertices()[i].features);
        z.extend_from_slice(graph.edge_features(e));
        z.extend_from_slice(&graph.vertices()[j].features);
        z.extend_from_slice(h.state(j));
    }

    fn step_unchecked(&self, graph: &FeatureGraph, states: &StateSet) -> StateSet {
        let s = self.config.state_dim;
        let mut next = StateSet { dim: s, k: states.k + 1, data: vec![0.0; states.data.len()] };
        let mut z = Vec::with_capacity(self.config.input_dim());
        let mut u = vec![0.0; self.config.hidden_dim];
        for i in 0..graph.vertex_count() {
            let out = &mut next.data[i * s..(i + 1) * s];
            for &(j, e) in graph.neighbors(i) {
                self.edge_input(graph, i, j, e, states, &mut z);
                self.f1().pre(&z, &mut u);
                for u in u.iter_mut() {
                    *u = self.config.hidden_activation.apply(*u);
                }
                let f2 = self.f2();
                for (r, o) in out.iter_mut().enumerate() {
                    let row = &f2.w[r * f2.cols..(r + 1) * f2.cols];
                    *o += f2.b[r] + row.iter().zip(&u).map(|(w, a)| w * a).sum::<f64>();
                }
            }
        }
        next
    }

    /// One synchronous update `h_i ← Σ_{j ∈ ne(i)} f(v_i, e_ij, v_j, h_j)`.
    pub fn transition_step(&self, graph: &FeatureGraph, states: &StateSet) -> Result<StateSet, RgnnError> {
        self.check_graph(graph)?;
        self.check_states(graph, states)?;
        Ok(self.step_unchecked(graph, states))
    }

    /// Iterates until the max-norm step change drops below `tolerance`.
    pub fn run_to_fixed_point(
        &self,
        graph: &FeatureGraph,
        start: StateSet,
        tolerance: f64,
        max_iter: usize,
    ) -> Result<FixedPoint, RgnnError> {
        self.check_graph(graph)?;
        self.check_states(graph, &start)?;
        let mut states = start;
        let mut log = Vec::new();
        for _ in 0..max_iter {
            let next = self.step_unchecked(graph, &states);
            let change = next.max_change(&states);
            if !change.is_finite() {
                return Err(RgnnError::NonFinite("state"));
            }
            log.push(change);
            states = next;
            if change < tolerance {
                return Ok(FixedPoint { states, log });
            }
        }
        Err(RgnnError::NotConverged { max_iter, last_change: log.last().copied().unwrap_or(f64::NAN) })
    }

    fn readout_forward(&self, h: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut inputs = vec![h.to_vec()];
        let mut pres = Vec::new();
        for l in self.readout_layers() {
            let (u, y) = l.forward(inputs.last().unwrap());
            pres.push(u);
            inputs.push(y);
        }
        (inputs, pres)
    }

    /// Applies `g` to every state; returns `N × output_dim` values.
    pub fn readout(&self, states: &StateSet) -> Result<Vec<f64>, RgnnError> {
        if states.dim != self.config.state_dim {
            return Err(RgnnError::StateShape {
                expected: states.len(),
                expected_dim: self.config.state_dim,
                found: states.len(),
                found_dim: states.dim,
            });
        }
        let mut out = Vec::with_capacity(states.len() * self.config.output_dim());
        for i in 0..states.len() {
            let (mut inputs, _) = self.readout_forward(states.state(i));
            out.append(inputs.last_mut().unwrap());
        }
        Ok(out)
    }

    /// Mean squared error of the readout after `steps` transition steps from
    /// `start`, and its gradient with respect to every parameter (flat order).
    /// `start` is treated as a constant.
    pub fn unrolled_loss_and_grad(
        &self,
        graph: &FeatureGraph,
        start: &StateSet,
        targets: &[f64],
        steps: usize,
    ) -> Result<(f64, Vec<f64>), RgnnError> {
        self.check_graph(graph)?;
        self.check_states(graph, start)?;
        let n = graph.vertex_count();
        let od = self.config.output_dim();
        if targets.len() != n * od {
            return Err(RgnnError::TargetShape { expected: n * od, found: targets.len() });
        }
        let mut grads: Vec<LayerGrad> =
            self.layers.iter().map(|l| LayerGrad { w: vec![0.0; l.w.len()], b: vec![0.0; l.b.len()] }).collect();
        if n == 0 {
            return Ok((0.0, flatten(&grads)));
        }

        let mut trajectory = vec![start.clone()];
        for _ in 0..steps {
            let next = self.step_unchecked(graph, trajectory.last().unwrap());
            trajectory.push(next);
        }
        let last = trajectory.last().unwrap();
        let s = self.config.state_dim;
        let m = (n * od) as f64;
        let mut loss = 0.0;
        let mut dh = vec![0.0; n * s];
        let g_grads = &mut grads[2..];
        for i in 0..n {
            let (inputs, pres) = self.readout_forward(last.state(i));
            let out = inputs.last().unwrap();
            let mut dy: Vec<f64> = out
                .iter()
                .zip(&targets[i * od..(i + 1) * od])
                .map(|(o, t)| {
                    loss += (o - t) * (o - t);
                    2.0 * (o - t) / m
                })
                .collect();
            for (li, l) in self.readout_layers().iter().enumerate().rev() {
                dy = l.backward(&inputs[li], &pres[li], &dy, &mut g_grads[li]);
            }
            dh[i * s..(i + 1) * s].copy_from_slice(&dy);
        }
        loss /= m;

        let hid = self.config.hidden_dim;
        let hb = self.config.h_block();
        let mut z = Vec::with_capacity(self.config.input_dim());
        let mut u = vec![0.0; hid];
        for t in (0..steps).rev() {
            let prev = &trajectory[t];
            let mut dprev = vec![0.0; n * s];
            let (g1, g2) = grads.split_at_mut(1);
            for i in 0..n {
                let gi = &dh[i * s..(i + 1) * s];
                if gi.iter().all(|&v| v == 0.0) {
                    continue;
                }
                for &(j, e) in graph.neighbors(i) {
                    self.edge_input(graph, i, j, e, prev, &mut z);
                    self.f1().pre(&z, &mut u);
                    let a: Vec<f64> = u.iter().map(|&u| self.config.hidden_activation.apply(u)).collect();
                    let da = self.f2().backward(&a, &a, gi, &mut g2[0]);
                    let dz = self.f1().backward(&z, &u, &da, &mut g1[0]);
                    for (d, v) in dprev[j * s..(j + 1) * s].iter_mut().zip(&dz[hb.clone()]) {
                        *d += v;
                    }
                }
            }
            dh = dprev;
        }
        let flat = flatten(&grads);
        if !loss.is_finite() {
            return Err(RgnnError::NonFinite("loss"));
        }
        if flat.iter().any(|g| !g.is_finite()) {
            return Err(RgnnError::NonFinite("gradient"));
        }
        Ok((loss, flat))
    }

    /// Fixed point from zero states, then the unrolled loss from there.
    fn labeled_loss(&self, item: &Labeled, opts: &TrainOptions) -> Result<(f64, Vec<f64>), RgnnError> {
        let fp = self.run_to_fixed_point(
            &item.graph,
            init_states(&item.graph, self.config.state_dim),
            opts.tolerance,
            opts.max_iter,
        )?;
        self.unrolled_loss_and_grad(&item.graph, &fp.states, &item.targets, opts.unroll)
    }

    fn dataset_loss(&self, data: &[Labeled], opts: &TrainOptions) -> Result<(f64, Vec<f64>), RgnnError> {
        let mut loss = 0.0;
        let mut grad = vec![0.0; self.param_count()];
        for item in data {
            let (l, g) = self.labeled_loss(item, opts)?;
            loss += l;
            for (a, b) in grad.iter_mut().zip(g) {
                *a += b;
            }
        }
        let k = data.len().max(1) as f64;
        grad.iter_mut().for_each(|g| *g /= k);
        Ok((loss / k, grad))
    }

    /// Gradient descent on the mean squared readout error. After every update
    /// the model is re-certified; an update that raises the loss by more than
    /// [`LOSS_SLACK`] is discarded and the learning rate halved, at most
    /// [`MAX_HALVINGS`] times.
    pub fn train(&self, data: &[Labeled], opts: &TrainOptions) -> Result<TrainReport, RgnnError> {
        let max_degree = data.iter().map(|d| d.graph.max_degree()).max().unwrap_or(0);
        let mask = self.trainable_mask(&opts.frozen)?;
        let mut model = self.certify_for_degree(max_degree);
        let mut lr = opts.learning_rate;
        let mut halvings = 0;
        let mut losses = Vec::with_capacity(opts.epochs + 1);
        let mut stopped_early = false;
        let (mut loss, mut grad) = model.dataset_loss(data, opts)?;
        for _ in 0..opts.epochs {
            losses.push(loss);
            if grad.iter().zip(&mask).all(|(g, &m)| !m || *g == 0.0) {
                continue;
            }
            loop {
                let params: Vec<f64> = model
                    .params()
                    .iter()
                    .zip(&grad)
                    .zip(&mask)
                    .map(|((p, g), &m)| if m { p - lr * g } else { *p })
                    .collect();
                let mut candidate = model.clone();
                candidate.set_params(&params);
                let candidate = candidate.certify_for_degree(max_degree);
                let accepted = match candidate.dataset_loss(data, opts) {
                    Ok((l, g)) if l <= loss + LOSS_SLACK => Some((l, g)),
                    Ok(_) | Err(RgnnError::NotConverged { .. }) => None,
                    Err(e) => return Err(e),
                };
                if let Some((l, g)) = accepted {
                    model = candidate;
                    loss = l;
                    grad = g;
                    break;
                }
                if halvings == MAX_HALVINGS {
                    stopped_early = true;
                    break;
                }
                lr /= 2.0;
                halvings += 1;
            }
            if stopped_early {
                break;
            }
        }
        losses.push(loss);
        Ok(TrainReport { model, losses, learning_rate: lr, halvings, stopped_early })
    }
}

fn flatten(grads: &[LayerGrad]) -> Vec<f64> {
    grads.iter().flat_map(|g| g.w.iter().chain(&g.b).copied()).collect()
}

/// Scalar model `f(h) = a·h + b`, readout `g(h) = r·h` (identity when `r` is `None`).
pub fn scalar_model(a: f64, b: f64, readout: Option<f64>, contraction_target: f64) -> Result<RgnnModel, RgnnError> {
    let config = RgnnConfig {
        vertex_dim: 0,
        edge_dim: 0,
        state_dim: 1,
        hidden_dim: 1,
        hidden_activation: Activation::Identity,
        readout: readout.map(|_| ReadoutLayer { out: 1, act: Activation::Identity }).into_iter().collect(),
        contraction_target,
    };
    let mut m = RgnnModel::zeros(config)?;
    m.layers[0].w[0] = 1.0;
    m.layers[1].w[0] = a;
    m.layers[1].b[0] = b;
    if let Some(r) = readout {
        m.layers[2].w[0] = r;
    }
    Ok(m)
}
