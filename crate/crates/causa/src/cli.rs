//! Argument parsing and dispatch.

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::commands::{self, Status};
use crate::config::{Overrides, RunConfig};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "causa", version, about = "Causal effect estimation, refutation and graph learning")]
pub struct Args {
    /// JSON run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Seed for placebo refutation (overrides `refute.seed`).
    #[arg(long, global = true, value_name = "INT")]
    pub seed: Option<u64>,
    /// Output file; what is written depends on the command.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Per-column summary statistics.
    Stats,
    /// Treatment effect with assumption checks.
    Estimate,
    /// Placebo-treatment refutation.
    Refute,
    /// Common support, overlap and covariate balance.
    Diagnose,
    /// Build and export the bipartite entity-attribute graph.
    Graph,
    /// Run a recurrent GNN to its fixed point.
    RgnnRun,
    /// Train a recurrent GNN on labeled graphs.
    RgnnTrain,
}

pub fn execute(args: &Args, out: &mut dyn Write) -> Result<Status, CliError> {
    let path = args.config.as_ref().ok_or_else(|| CliError::Config("--config <PATH> is required".into()))?;
    let cfg = RunConfig::load(path, &Overrides { seed: args.seed, out: args.out.clone() })?;
    match args.command {
        Command::Stats => commands::cmd_stats(&cfg, out),
        Command::Estimate => commands::cmd_estimate(&cfg, out),
        Command::Refute => commands::cmd_refute(&cfg, out),
        Command::Diagnose => commands::cmd_diagnose(&cfg, out),
        Command::Graph => commands::cmd_graph(&cfg, out),
        Command::RgnnRun => commands::cmd_rgnn_run(&cfg, out),
        Command::RgnnTrain => commands::cmd_rgnn_train(&cfg, out),
    }
}

/// Runs the parsed command and returns the process exit code.
pub fn run(args: &Args, out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    match execute(args, out) {
        Ok(status) => status.exit_code(),
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}
