//! Run configuration: one JSON file per run, with relative paths resolved
//! against the file's directory.

use std::path::{Path, PathBuf};

use causa_core::assumptions::{GroupingRule, DEFAULT_EPSILON};
use causa_core::dataset::Schema;
use causa_core::estimators::{Method, StratumWeighting, DEFAULT_STRATA};
use causa_core::interp::FillMethod;
use causa_core::netgraph::GraphFormat;
use causa_core::refutation::{PlaceboMode, DEFAULT_PERMUTATIONS};
use causa_core::rgnn::{DEFAULT_MAX_ITER, DEFAULT_TOLERANCE, DEFAULT_UNROLL};
use serde::Deserialize;

use crate::error::CliError;
use crate::io;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub schema: Option<SchemaSource>,
    #[serde(default)]
    pub wrangle: WrangleConfig,
    pub dag: Option<PathBuf>,
    pub estimator: Option<String>,
    #[serde(default = "default_strata")]
    pub n_strata: usize,
    #[serde(default)]
    pub stratum_weighting: StratumWeighting,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Column whose values define the subpopulations checked for overlap.
    pub overlap_group: Option<String>,
    /// Split `overlap_group` into this many equal-frequency bins instead of
    /// taking its distinct values.
    pub overlap_bins: Option<usize>,
    /// Covariates used in addition to the adjustment set.
    #[serde(default)]
    pub include_covariates: Vec<String>,
    #[serde(default)]
    pub refute: RefuteConfig,
    pub graph: Option<GraphConfig>,
    pub rgnn: Option<RgnnConfigFile>,
    pub out: Option<PathBuf>,
}

/// Inline schema or the path of a TOML schema file.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum SchemaSource {
    Inline(Schema),
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FillPolicy {
    #[default]
    None,
    Cubic,
    Pad,
    CubicPad,
}

impl FillPolicy {
    pub fn method(self) -> Option<FillMethod> {
        match self {
            FillPolicy::None => None,
            FillPolicy::Cubic => Some(FillMethod::Cubic),
            FillPolicy::Pad => Some(FillMethod::Pad),
            FillPolicy::CubicPad => Some(FillMethod::CubicPad),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WrangleConfig {
    #[serde(default)]
    pub fill: FillPolicy,
    /// Columns to fill; the outcome column when empty.
    #[serde(default)]
    pub fill_columns: Vec<String>,
    /// Derive pre/post outcome columns and estimate on the post column.
    #[serde(default)]
    pub lag: bool,
    #[serde(default = "default_pre")]
    pub pre_column: String,
    #[serde(default = "default_post")]
    pub post_column: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefuteConfig {
    #[serde(default = "default_permutations")]
    pub permutations: usize,
    pub seed: Option<u64>,
    #[serde(default)]
    pub mode: PlaceboMode,
    #[serde(default = "yes")]
    pub parallel: bool,
}

impl Default for RefuteConfig {
    fn default() -> Self {
        Self { permutations: DEFAULT_PERMUTATIONS, seed: None, mode: PlaceboMode::default(), parallel: true }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphConfig {
    pub data: PathBuf,
    pub entity: String,
    pub attribute: String,
    #[serde(default = "default_format")]
    pub format: String,
    pub output: Option<PathBuf>,
    #[serde(default = "default_top")]
    pub top: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RgnnConfigFile {
    pub model: PathBuf,
    pub graph: PathBuf,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Convergence log written by `rgnn-run`.
    pub log: Option<PathBuf>,
    pub train: Option<TrainConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    /// Labeled graph files (graph plus per-vertex targets).
    pub data: Vec<PathBuf>,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_unroll")]
    pub unroll: usize,
    #[serde(default)]
    pub frozen: Vec<String>,
    /// Where the trained model is written.
    pub output: Option<PathBuf>,
}

fn default_strata() -> usize {
    DEFAULT_STRATA
}
fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}
fn default_pre() -> String {
    "Pre_users".into()
}
fn default_post() -> String {
    "Post_users".into()
}
fn default_permutations() -> usize {
    DEFAULT_PERMUTATIONS
}
fn yes() -> bool {
    true
}
fn default_format() -> String {
    "dot".into()
}
fn default_top() -> usize {
    10
}
fn default_tolerance() -> f64 {
    DEFAULT_TOLERANCE
}
fn default_max_iter() -> usize {
    DEFAULT_MAX_ITER
}
fn default_epochs() -> usize {
    200
}
fn default_learning_rate() -> f64 {
    0.1
}
fn default_unroll() -> usize {
    DEFAULT_UNROLL
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, CliError> {
        let mut cfg: RunConfig = io::read_json(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.resolve_paths(&base);
        if let Some(seed) = overrides.seed {
            cfg.refute.seed = Some(seed);
        }
        if let Some(out) = &overrides.out {
            cfg.out = Some(out.clone());
        }
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [&mut self.data, &mut self.dag, &mut self.out].into_iter().flatten() {
            fix(p);
        }
        if let Some(SchemaSource::File(p)) = &mut self.schema {
            fix(p);
        }
        if let Some(g) = &mut self.graph {
            fix(&mut g.data);
            if let Some(o) = &mut g.output {
                fix(o);
            }
        }
        if let Some(r) = &mut self.rgnn {
            fix(&mut r.model);
            fix(&mut r.graph);
            if let Some(l) = &mut r.log {
                fix(l);
            }
            if let Some(t) = &mut r.train {
                t.data.iter_mut().for_each(fix);
                if let Some(o) = &mut t.output {
                    fix(o);
                }
            }
        }
    }

    pub fn data_path(&self) -> Result<&Path, CliError> {
        self.data.as_deref().ok_or_else(|| missing("data"))
    }

    pub fn schema(&self) -> Result<Schema, CliError> {
        match self.schema.as_ref().ok_or_else(|| missing("schema"))? {
            SchemaSource::Inline(s) => Ok(s.clone()),
            SchemaSource::File(p) => io::load_schema(p),
        }
    }

    pub fn method(&self) -> Result<Method, CliError> {
        let token = self.estimator.as_deref().ok_or_else(|| {
            CliError::Config(format!("config key `estimator` is required; valid estimators: {}", Method::TOKENS.join(", ")))
        })?;
        token.parse().map_err(CliError::Config)
    }

    pub fn seed(&self) -> Result<u64, CliError> {
        self.refute
            .seed
            .ok_or_else(|| CliError::Config("refutation needs a seed (config `refute.seed` or --seed)".into()))
    }

    pub fn grouping(&self) -> Result<GroupingRule, CliError> {
        Ok(match (&self.overlap_group, self.overlap_bins) {
            (None, None) => GroupingRule::Whole,
            (Some(column), None) => GroupingRule::Discrete { column: column.clone() },
            (Some(column), Some(bins)) => GroupingRule::Quantiles { column: column.clone(), bins },
            (None, Some(_)) => return Err(CliError::Config("`overlap_bins` needs `overlap_group`".into())),
        })
    }

    pub fn graph(&self) -> Result<&GraphConfig, CliError> {
        self.graph.as_ref().ok_or_else(|| missing("graph"))
    }

    pub fn graph_format(&self) -> Result<GraphFormat, CliError> {
        self.graph()?.format.parse().map_err(|e: causa_core::netgraph::GraphError| CliError::Config(e.to_string()))
    }

    pub fn rgnn(&self) -> Result<&RgnnConfigFile, CliError> {
        self.rgnn.as_ref().ok_or_else(|| missing("rgnn"))
    }
}

fn missing(key: &str) -> CliError {
    CliError::Config(format!("config key `{key}` is required for this command"))
}
