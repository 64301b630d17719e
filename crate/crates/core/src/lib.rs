//! Causal-effect estimation and assurance primitives.
//!
//! `causa-core` is `no_std` (it needs `alloc`). Everything in here is a pure
//! function over in-memory values: ingestion from already-tokenized records,
//! gap filling, causal DAG validation and adjustment sets, treatment-effect
//! estimators, assumption diagnostics, placebo refutation, bipartite feature
//! graphs and a recurrent graph neural network with a contraction certificate.
//!
//! File IO, configuration and the command line live in the `causa` crate.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod assumptions;
pub mod dag;
pub mod dataset;
pub mod estimators;
pub mod interp;
pub mod linalg;
pub mod netgraph;
pub mod refutation;
pub mod rgnn;
pub mod stats;

pub use assumptions::{AssumptionReport, CommonSupport, GroupOverlap, GroupingRule};
pub use dag::{CausalDag, DagSpec, IdentificationReport, NodeRole};
pub use dataset::{CausalDataset, ColumnSummary, GapPolicy, Schema, UnitKey};
pub use estimators::{EffectEstimate, EstimatorKind, LinearOutcomeModel, Method, PropensityModel};
pub use netgraph::{FeatureGraph, Part};
pub use refutation::{PlaceboMode, RefutationResult};
pub use rgnn::{RgnnModel, StateSet};
