//! File formats, configuration and the batch command line for `causa-core`.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod parallel;
pub mod rgnn_files;
pub mod synth;

pub use error::CliError;
