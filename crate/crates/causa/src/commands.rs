//! One function per subcommand. Each writes its report to `out` and returns
//! whether every assumption check passed.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use causa_core::assumptions::{assumptions_report, AssumptionReport};
use causa_core::dag::{CausalDag, DagSpec, IdentificationReport};
use causa_core::dataset::{render_summary, CausalDataset};
use causa_core::estimators::{
    balance_diagnostics, estimate_propensity, match_nearest_neighbor, BalanceSample, StratumUnits, EffectEstimate, EstimatorKind, Method,
};
use causa_core::netgraph::{FeatureGraph, Part};
use causa_core::refutation::{refute_placebo, RefutationResult};
use causa_core::rgnn::{init_states, TrainOptions};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::parallel::refute_placebo_parallel;
use crate::{io, rgnn_files};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    /// Results were produced but an assumption check failed.
    AssumptionFailure,
}

impl Status {
    pub fn exit_code(self) -> u8 {
        match self {
            Status::Success => 0,
            Status::AssumptionFailure => 2,
        }
    }
}

/// Dataset after wrangling, with the covariates the estimators will use.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub data: CausalDataset,
    pub covariates: Vec<String>,
    pub identification: Option<IdentificationReport>,
}

pub fn load_dataset(cfg: &RunConfig) -> Result<CausalDataset, CliError> {
    io::load_csv(cfg.data_path()?, &cfg.schema()?)
}

pub fn wrangle(ds: CausalDataset, cfg: &RunConfig) -> Result<CausalDataset, CliError> {
    let w = &cfg.wrangle;
    let mut ds = ds;
    if let Some(method) = w.fill.method() {
        let columns = if w.fill_columns.is_empty() { vec![ds.schema().outcome.clone()] } else { w.fill_columns.clone() };
        for c in &columns {
            ds = ds.fill_column(c, method).map_err(CliError::Wrangle)?;
        }
    }
    if w.lag {
        ds = ds.derive_lagged_outcome(&w.pre_column, &w.post_column).map_err(CliError::Wrangle)?;
    }
    Ok(ds)
}

pub fn load_dag(path: &Path) -> Result<CausalDag, CliError> {
    Ok(CausalDag::build(&io::read_json::<DagSpec>(path)?)?)
}

pub fn prepare(cfg: &RunConfig) -> Result<Prepared, CliError> {
    let ds = wrangle(load_dataset(cfg)?, cfg)?;
    let (mut covariates, identification) = match &cfg.dag {
        Some(path) => {
            let dag = load_dag(path)?;
            let schema = ds.schema();
            if dag.treatment() != schema.treatment || dag.outcome() != schema.outcome {
                return Err(CliError::Config(format!(
                    "causal graph has treatment `{}` and outcome `{}`, data has `{}` and `{}`",
                    dag.treatment(),
                    dag.outcome(),
                    schema.treatment,
                    schema.outcome
                )));
            }
            let report = dag.adjustment_set();
            (report.adjustment_set.clone(), Some(report))
        }
        None => (ds.schema().covariates.clone(), None),
    };
    for c in &cfg.include_covariates {
        if !covariates.contains(c) {
            covariates.push(c.clone());
        }
    }
    let data = ds.with_covariates(&covariates).map_err(CliError::Wrangle)?;
    Ok(Prepared { data, covariates, identification })
}

pub fn estimator_kind(cfg: &RunConfig, covariates: &[String]) -> Result<EstimatorKind, CliError> {
    Ok(match cfg.method()? {
        Method::DiffInMeans => EstimatorKind::DiffInMeans,
        Method::CovariateAdjustment => EstimatorKind::CovariateAdjustment { covariates: covariates.to_vec() },
        Method::PsmStratified => EstimatorKind::PsmStratified {
            covariates: covariates.to_vec(),
            n_strata: cfg.n_strata,
            weighting: cfg.stratum_weighting,
        },
    })
}

fn emit(out: &mut dyn Write, cfg: &RunConfig, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes()).map_err(CliError::Output)?;
    if let Some(path) = &cfg.out {
        io::write_text(path, text)?;
    }
    Ok(())
}

fn list(names: &[String]) -> String {
    if names.is_empty() {
        "(none)".to_string()
    } else {
        names.join(", ")
    }
}

fn render_identification(text: &mut String, prepared: &Prepared) {
    if let Some(r) = &prepared.identification {
        let _ = writeln!(text, "Adjustment set: {}", list(&r.adjustment_set));
        if r.unobserved_warning {
            let _ = writeln!(
                text,
                "Warning: unobserved confounders {} affect both treatment and outcome; the estimate assumes their influence is negligible",
                list(&r.unobserved)
            );
        }
    }
    let _ = writeln!(text, "Covariates: {}", list(&prepared.covariates));
}

fn render_estimate(text: &mut String, est: &EffectEstimate) {
    let _ = writeln!(text, "Estimator: {}", est.method.token());
    let _ = writeln!(text, "Estimated Effect: {:?}", est.value);
    let _ = writeln!(text, "Treated units: {}", est.n_treated);
    let _ = writeln!(text, "Control units: {}", est.n_control);
    for (k, s) in est.strata.iter().enumerate() {
        let _ = writeln!(
            text,
            "  stratum {} [{:?}, {:?}]: effect {:?} (treated {}, control {})",
            k + 1,
            s.lower,
            s.upper,
            s.effect,
            s.n_treated,
            s.n_control
        );
    }
    for w in &est.warnings {
        let _ = writeln!(text, "Warning: {w}");
    }
}

fn diagnostics(cfg: &RunConfig, prepared: &Prepared) -> Result<AssumptionReport, CliError> {
    let model = estimate_propensity(&prepared.data, &prepared.covariates)?;
    Ok(assumptions_report(&prepared.data, &model, cfg.epsilon, &cfg.grouping()?)?)
}

fn verdict(report: &AssumptionReport) -> Status {
    if report.passed() {
        Status::Success
    } else {
        Status::AssumptionFailure
    }
}

pub fn cmd_stats(cfg: &RunConfig, out: &mut dyn Write) -> Result<Status, CliError> {
    let ds = load_dataset(cfg)?;
    emit(out, cfg, &render_summary(&ds.summary_stats()))?;
    Ok(Status::Success)
}

pub fn cmd_estimate(cfg: &RunConfig, out: &mut dyn Write) -> Result<Status, CliError> {
    let prepared = prepare(cfg)?;
    let kind = estimator_kind(cfg, &prepared.covariates)?;
    let est = kind.estimate(&prepared.data)?;
    let report = diagnostics(cfg, &prepared)?;
    let mut text = String::new();
    render_identification(&mut text, &prepared);
    render_estimate(&mut text, &est);
    let status = verdict(&report);
    let _ = writeln!(text);
    let _ = writeln!(text, "Assumption checks: {}", if report.passed() { "PASS" } else { "FAIL" });
    text.push_str(&report.render());
    emit(out, cfg, &text)?;
    Ok(status)
}

pub fn run_refutation(cfg: &RunConfig, prepared: &Prepared) -> Result<RefutationResult, CliError> {
    let kind = estimator_kind(cfg, &prepared.covariates)?;
    let seed = cfg.seed()?;
    let r = &cfg.refute;
    Ok(if r.parallel {
        refute_placebo_parallel(&prepared.data, &kind, r.permutations, seed, r.mode)?
    } else {
        refute_placebo(&prepared.data, &kind, r.permutations, seed, r.mode)?
    })
}

pub fn cmd_refute(cfg: &RunConfig, out: &mut dyn Write) -> Result<Status, CliError> {
    let prepared = prepare(cfg)?;
    let result = run_refutation(cfg, &prepared)?;
    emit(out, cfg, &result.render())?;
    Ok(Status::Success)
}

pub fn cmd_diagnose(cfg: &RunConfig, out: &mut dyn Write) -> Result<Status, CliError> {
    let prepared = prepare(cfg)?;
    let report = diagnostics(cfg, &prepared)?;
    let mut text = String::new();
    render_identification(&mut text, &prepared);
    let _ = writeln!(text, "Assumption checks: {}", if report.passed() { "PASS" } else { "FAIL" });
    text.push_str(&report.render());
    if !prepared.covariates.is_empty() {
        let model = estimate_propensity(&prepared.data, &prepared.covariates)?;
        let all: Vec<usize> = (0..prepared.data.len()).collect();
        let whole = [StratumUnits { lower: 0.0, upper: 1.0, units: all }];
        let pairs = match_nearest_neighbor(&model, &prepared.data)?;
        let before = balance_diagnostics(BalanceSample::Strata(&whole), &prepared.data, &prepared.covariates)?;
        let after = balance_diagnostics(BalanceSample::Matched(&pairs), &prepared.data, &prepared.covariates)?;
        let _ = writeln!(text, "Covariate balance (standardized mean difference):");
        let _ = writeln!(text, "  covariate: treated mean, control mean, SMD all units, SMD matched ({} pairs)", pairs.len());
        for (b, a) in before.iter().zip(&after) {
            let _ = writeln!(
                text,
                "  {}: {:?}, {:?}, {:?}, {:?}{}",
                b.covariate,
                b.mean_treated,
                b.mean_control,
                b.smd,
                a.smd,
                if a.flagged { " (imbalanced)" } else { "" }
            );
        }
    }
    emit(out, cfg, &text)?;
    Ok(verdict(&report))
}

pub fn cmd_graph(cfg: &RunConfig, out: &mut dyn Write) -> Result<Status, CliError> {
    let g = cfg.graph()?;
    let format = cfg.graph_format()?;
    let target = cfg
        .out
        .as_ref()
        .or(g.output.as_ref())
        .ok_or_else(|| CliError::Config("graph export needs an output path (config `graph.output` or --out)".into()))?;
    let (header, rows) = io::read_table(&g.data)?;
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Config(format!("{}: no column `{name}`", g.data.display())))
    };
    let (ei, ai) = (col(&g.entity)?, col(&g.attribute)?);
    let records: Vec<(String, String)> = rows
        .iter()
        .map(|r| (r.get(ei).cloned().unwrap_or_default(), r.get(ai).cloned().unwrap_or_default()))
        .collect();
    let graph = FeatureGraph::build_bipartite(&records)?;
    io::write_text(target, &graph.export(format))?;

    let ranking = graph.centrality_ranking();
    let shown = &ranking[..ranking.len().min(g.top)];
    let width = shown.iter().map(|(k, _)| k.name.chars().count()).chain(["Vertex".len()]).max().unwrap_or(0) + 2;
    let mut text = String::new();
    let _ = writeln!(text, "Vertices: {} ({} entities, {} attributes)", graph.vertex_count(),
        graph.vertices().iter().filter(|v| v.key.part == Part::Entity).count(),
        graph.vertices().iter().filter(|v| v.key.part == Part::Attribute).count());
    let _ = writeln!(text, "Edges: {}", graph.edge_count());
    let _ = writeln!(text, "Degree centrality (top {}):", shown.len());
    let _ = writeln!(text, "{:<5}{:<width$}{:<11}Degree", "Rank", "Vertex", "Part");
    for (i, (k, d)) in shown.iter().enumerate() {
        let _ = writeln!(text, "{:<5}{:<width$}{:<11}{d}", i + 1, k.name, k.part.token());
    }
    out.write_all(text.as_bytes()).map_err(CliError::Output)?;
    Ok(Status::Success)
}

pub fn cmd_rgnn_run(cfg: &RunConfig, out: &mut dyn Write) -> Result<Status, CliError> {
    let r = cfg.rgnn()?;
    let log_path = cfg
        .out
        .as_ref()
        .or(r.log.as_ref())
        .ok_or_else(|| CliError::Config("rgnn-run needs a convergence log path (config `rgnn.log` or --out)".into()))?;
    let model = rgnn_files::load_model(&r.model)?;
    let file = rgnn_files::load_graph_file(&r.graph)?;
    let graph = file.to_graph()?;
    let certified = model.certify_contraction(&graph);
    let fp = certified.run_to_fixed_point(&graph, init_states(&graph, model.config().state_dim), r.tolerance, r.max_iter)?;
    let outputs = certified.readout(&fp.states)?;
    io::write_text(log_path, &rgnn_files::convergence_log(&fp.log))?;

    let mut text = String::new();
    if let Some(c) = certified.certificate() {
        let _ = writeln!(
            text,
            "Contraction certificate: L = {:?}, max degree = {}, scale = {:?}, bound = {:?} (target {:?})",
            c.lipschitz,
            c.max_degree,
            c.scale,
            c.bound,
            model.config().contraction_target
        );
    }
    let _ = writeln!(
        text,
        "Converged after k = {} iterations (last step change {:e})",
        fp.states.k,
        fp.log.last().copied().unwrap_or(0.0)
    );
    let od = certified.config().output_dim();
    let name_width = graph.vertices().iter().map(|v| v.key.name.chars().count()).max().unwrap_or(0) + 2;
    let fmt = |xs: &[f64]| xs.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(" ");
    let _ = writeln!(text, "Final states:");
    for (i, v) in graph.vertices().iter().enumerate() {
        let _ = writeln!(text, "  {:<name_width$}{}", v.key.name, fmt(fp.states.state(i)));
    }
    let _ = writeln!(text, "Readout:");
    for (i, v) in graph.vertices().iter().enumerate() {
        let _ = writeln!(text, "  {:<name_width$}{}", v.key.name, fmt(&outputs[i * od..(i + 1) * od]));
    }
    out.write_all(text.as_bytes()).map_err(CliError::Output)?;
    Ok(Status::Success)
}

pub fn cmd_rgnn_train(cfg: &RunConfig, out: &mut dyn Write) -> Result<Status, CliError> {
    let r = cfg.rgnn()?;
    let t = r.train.as_ref().ok_or_else(|| CliError::Config("config key `rgnn.train` is required for this command".into()))?;
    let target = cfg
        .out
        .as_ref()
        .or(t.output.as_ref())
        .ok_or_else(|| CliError::Config("rgnn-train needs an output model path (config `rgnn.train.output` or --out)".into()))?;
    if t.data.is_empty() {
        return Err(CliError::Config("`rgnn.train.data` lists no training graphs".into()));
    }
    let model = rgnn_files::load_model(&r.model)?;
    let od = model.config().output_dim();
    let data = t
        .data
        .iter()
        .map(|p| rgnn_files::load_graph_file(p)?.to_labeled(od))
        .collect::<Result<Vec<_>, CliError>>()?;
    let opts = TrainOptions {
        epochs: t.epochs,
        learning_rate: t.learning_rate,
        unroll: t.unroll,
        tolerance: r.tolerance,
        max_iter: r.max_iter,
        frozen: t.frozen.clone(),
    };
    let report = model.train(&data, &opts)?;
    rgnn_files::save_model(target, &report.model)?;

    let mut text = String::new();
    let first = report.losses.first().copied().unwrap_or(0.0);
    let last = report.losses.last().copied().unwrap_or(0.0);
    let _ = writeln!(text, "Epochs: {}", report.losses.len().saturating_sub(1));
    let _ = writeln!(text, "Initial loss: {first:?}");
    let _ = writeln!(text, "Final loss: {last:?}");
    let _ = writeln!(text, "Learning rate: {:?} after {} halvings", report.learning_rate, report.halvings);
    if report.stopped_early {
        let _ = writeln!(text, "Stopped early: no step reduced the loss");
    }
    let _ = writeln!(text, "Parameters:");
    for tensor in report.model.tensors() {
        let _ = writeln!(text, "  {} {:?}", tensor.name, tensor.data);
    }
    out.write_all(text.as_bytes()).map_err(CliError::Output)?;
    Ok(Status::Success)
}
