//! Identifiability diagnostics.
//!
//! Common support is checked on propensity scores (trimming at ε) and on
//! subpopulations; ignorability and SUTVA cannot be tested from the observed
//! table and are carried as explicit declarations.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{CausalDataset, DatasetError, UnitKey};
use crate::estimators::PropensityModel;

pub const DEFAULT_EPSILON: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AssumptionError {
    #[error("epsilon must lie in (0, 0.5), got {0}")]
    Epsilon(f64),
    #[error("grouping produced an empty group `{0}`")]
    EmptyGroup(String),
    #[error("quantile grouping needs at least one bin")]
    NoBins,
    #[error("{0} scores for {1} units")]
    ScoreCount(usize, usize),
    #[error(transparent)]
    Data(#[from] DatasetError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violator {
    pub unit: UnitKey,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommonSupport {
    pub epsilon: f64,
    pub passed: bool,
    pub violators: Vec<Violator>,
}

/// Fails iff some score lies below ε or above 1 − ε.
pub fn check_common_support(
    ds: &CausalDataset,
    model: &PropensityModel,
    epsilon: f64,
) -> Result<CommonSupport, AssumptionError> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(AssumptionError::Epsilon(epsilon));
    }
    if model.scores.len() != ds.len() {
        return Err(AssumptionError::ScoreCount(model.scores.len(), ds.len()));
    }
    let violators: Vec<Violator> = ds
        .keys()
        .iter()
        .zip(&model.scores)
        .filter(|(_, &s)| s < epsilon || s > 1.0 - epsilon)
        .map(|(k, &s)| Violator { unit: k.clone(), score: s })
        .collect();
    Ok(CommonSupport { epsilon, passed: violators.is_empty(), violators })
}

/// How units are partitioned into subpopulations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupingRule {
    /// One group per distinct value of the column.
    Discrete { column: String },
    /// Equal-frequency bins of a numeric column.
    Quantiles { column: String, bins: usize },
    /// Every unit in one group.
    Whole,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupOverlap {
    pub group: String,
    pub n_treated: usize,
    pub n_control: usize,
    pub passed: bool,
}

/// Each group passes iff it holds at least one treated and one control unit.
pub fn check_subpopulation_overlap(
    ds: &CausalDataset,
    rule: &GroupingRule,
) -> Result<Vec<GroupOverlap>, AssumptionError> {
    let labels: Vec<String> = match rule {
        GroupingRule::Whole => alloc::vec![String::from("all"); ds.len()],
        GroupingRule::Discrete { column } => ds
            .labels(column)?
            .into_iter()
            .map(|l| l.unwrap_or_else(|| String::from("NA")))
            .collect(),
        GroupingRule::Quantiles { column, bins } => {
            if *bins == 0 {
                return Err(AssumptionError::NoBins);
            }
            let values = ds.numeric(column)?;
            let mut sorted = values.clone();
            sorted.sort_by(f64::total_cmp);
            let n = values.len();
            let cuts: Vec<f64> = (1..*bins).map(|k| sorted[k * n / bins]).collect();
            let mut counts = alloc::vec![0usize; *bins];
            let labels: Vec<String> = values
                .iter()
                .map(|v| {
                    let b = cuts.iter().filter(|&&c| c <= *v).count();
                    counts[b] += 1;
                    format!("{column} q{}", b + 1)
                })
                .collect();
            if let Some(b) = counts.iter().position(|&c| c == 0) {
                return Err(AssumptionError::EmptyGroup(format!("{column} q{}", b + 1)));
            }
            labels
        }
    };
    let mut groups: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for (label, &t) in labels.into_iter().zip(ds.treatment()) {
        let e = groups.entry(label).or_default();
        if t {
            e.0 += 1;
        } else {
            e.1 += 1;
        }
    }
    Ok(groups
        .into_iter()
        .map(|(group, (n_treated, n_control))| GroupOverlap {
            group,
            n_treated,
            n_control,
            passed: n_treated > 0 && n_control > 0,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Declaration {
    pub name: String,
    pub statement: String,
}

/// The two assumptions that are reported, not tested.
pub fn declarations() -> [Declaration; 2] {
    [
        Declaration {
            name: "Ignorability".to_string(),
            statement: "(Y0, Y1) ⊥ T | x: given the adjustment covariates, potential outcomes are \
                        independent of treatment assignment (no unobserved confounding). \
                        Assumed, not tested: it cannot be checked from the observed table."
                .to_string(),
        },
        Declaration {
            name: "SUTVA".to_string(),
            statement: "Each unit's outcome depends only on its own treatment, not on the \
                        treatments of other units. Assumed, not tested: it cannot be checked \
                        from the observed table."
                .to_string(),
        },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub common_support: CommonSupport,
    pub overlap_rule: GroupingRule,
    pub overlap_checks: Vec<GroupOverlap>,
    pub declared: Vec<Declaration>,
}

impl AssumptionReport {
    /// True when every testable check passed.
    pub fn passed(&self) -> bool {
        self.common_support.passed && self.overlap_checks.iter().all(|g| g.passed)
    }

    pub fn render(&self) -> String {
        let verdict = |ok: bool| if ok { "PASS" } else { "FAIL" };
        let mut out = String::new();
        let cs = &self.common_support;
        let _ = writeln!(out, "Common support (epsilon = {:?}): {}", cs.epsilon, verdict(cs.passed));
        for v in &cs.violators {
            let _ = writeln!(out, "  violator {}: score {:?}", v.unit, v.score);
        }
        let rule = match &self.overlap_rule {
            GroupingRule::Whole => String::from("whole sample"),
            GroupingRule::Discrete { column } => column.clone(),
            GroupingRule::Quantiles { column, bins } => format!("{column} ({bins} quantile bins)"),
        };
        let all = self.overlap_checks.iter().all(|g| g.passed);
        let _ = writeln!(out, "Subpopulation overlap by {rule}: {}", verdict(all));
        for g in &self.overlap_checks {
            let _ = writeln!(
                out,
                "  {}: treated {}, control {}: {}",
                g.group,
                g.n_treated,
                g.n_control,
                verdict(g.passed)
            );
        }
        let _ = writeln!(out, "DECLARED");
        for d in &self.declared {
            let _ = writeln!(out, "  {}: {}", d.name, d.statement);
        }
        out
    }
}

pub fn assumptions_report(
    ds: &CausalDataset,
    model: &PropensityModel,
    epsilon: f64,
    rule: &GroupingRule,
) -> Result<AssumptionReport, AssumptionError> {
    Ok(AssumptionReport {
        common_support: check_common_support(ds, model, epsilon)?,
        overlap_rule: rule.clone(),
        overlap_checks: check_subpopulation_overlap(ds, rule)?,
        declared: declarations().into(),
    })
}
