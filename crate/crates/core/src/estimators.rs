//! Average and conditional treatment-effect estimators.
//!
//! * difference in group means,
//! * covariate adjustment through a linear outcome model `y = α·x + β·t + γ`,
//! * propensity-score stratification, with the logistic propensity model,
//!   nearest-neighbour matching and covariate-balance diagnostics it relies on.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{CausalDataset, DatasetError};
use crate::linalg::{self, LinalgError, PivotedCholesky};
use crate::stats::{logistic, mean, sample_variance};

/// L2 penalty on the standardized, non-intercept propensity weights.
pub const PROPENSITY_L2: f64 = 1e-6;
/// Iteration budget for the propensity IRLS solver.
pub const PROPENSITY_MAX_ITER: usize = 200;
/// Propensity scores are clamped to `[SCORE_CLAMP, 1 − SCORE_CLAMP]`.
pub const SCORE_CLAMP: f64 = 1e-12;
/// |SMD| above this flags a covariate as imbalanced.
pub const SMD_THRESHOLD: f64 = 0.1;
pub const DEFAULT_STRATA: usize = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimateError {
    #[error("both treatment groups must be non-empty (treated {treated}, control {control})")]
    EmptyGroup { treated: usize, control: usize },
    #[error(transparent)]
    Data(#[from] DatasetError),
    #[error("design is rank deficient; colliding columns: {}", .columns.join(", "))]
    RankDeficient { columns: Vec<String> },
    #[error("{rows} rows cannot determine {params} parameters")]
    TooFewRows { rows: usize, params: usize },
    #[error("covariate profile does not match the model covariates {expected:?}")]
    CovariateMismatch { expected: Vec<String> },
    #[error("the {0} arm has no units")]
    EmptyArm(&'static str),
    #[error("covariate `{0}` has zero variance")]
    ConstantCovariate(String),
    #[error("propensity fit did not converge within {0} iterations")]
    NotConverged(usize),
    #[error("propensity fit could not reduce the penalized loss at iteration {0}")]
    NoDescent(usize),
    #[error("n_strata must be at least 1")]
    NoStrata,
    #[error("every stratum lacks treated or control units")]
    AllStrataDegenerate,
    #[error("non-finite value in the estimation input")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    DiffInMeans,
    CovariateAdjustment,
    PsmStratified,
}

impl Method {
    pub fn token(self) -> &'static str {
        match self {
            Method::DiffInMeans => "diff_in_means",
            Method::CovariateAdjustment => "covariate_adjustment",
            Method::PsmStratified => "psm_stratified",
        }
    }

    pub const TOKENS: [&'static str; 3] = ["diff_in_means", "covariate_adjustment", "psm_stratified"];
}

impl core::str::FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "diff_in_means" => Ok(Method::DiffInMeans),
            "covariate_adjustment" => Ok(Method::CovariateAdjustment),
            "psm_stratified" => Ok(Method::PsmStratified),
            other => Err(format!(
                "unknown estimator `{other}`; valid estimators: {}",
                Method::TOKENS.join(", ")
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stratum {
    pub lower: f64,
    pub upper: f64,
    pub effect: f64,
    pub size: usize,
    pub n_treated: usize,
    pub n_control: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectEstimate {
    pub method: Method,
    pub value: f64,
    pub n_treated: usize,
    pub n_control: usize,
    #[serde(default)]
    pub strata: Vec<Stratum>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

fn group_counts(treatment: &[bool]) -> (usize, usize) {
    let treated = treatment.iter().filter(|&&t| t).count();
    (treated, treatment.len() - treated)
}

fn require_both_groups(treatment: &[bool]) -> Result<(usize, usize), EstimateError> {
    match group_counts(treatment) {
        (0, c) => Err(EstimateError::EmptyGroup { treated: 0, control: c }),
        (t, 0) => Err(EstimateError::EmptyGroup { treated: t, control: 0 }),
        ok => Ok(ok),
    }
}

/// Mean outcome of treated rows minus mean outcome of control rows, over
/// `rows` (summed in the order given).
fn group_difference(y: &[f64], t: &[bool], rows: impl Iterator<Item = usize>) -> (f64, usize, usize) {
    let (mut s1, mut n1, mut s0, mut n0) = (0.0, 0usize, 0.0, 0usize);
    for r in rows {
        if t[r] {
            s1 += y[r];
            n1 += 1;
        } else {
            s0 += y[r];
            n0 += 1;
        }
    }
    (s1 / n1 as f64 - s0 / n0 as f64, n1, n0)
}

pub fn ate_difference_in_means(ds: &CausalDataset) -> Result<EffectEstimate, EstimateError> {
    require_both_groups(ds.treatment())?;
    let y = ds.outcome()?;
    let (value, n_treated, n_control) = group_difference(&y, ds.treatment(), 0..ds.len());
    Ok(EffectEstimate { method: Method::DiffInMeans, value, n_treated, n_control, strata: Vec::new(), warnings: Vec::new() })
}

/// `y = α·x + β·t + γ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearOutcomeModel {
    pub covariates: Vec<String>,
    pub alpha: Vec<f64>,
    pub beta: f64,
    pub gamma: f64,
}

impl LinearOutcomeModel {
    pub fn predict(&self, x: &[f64], t: f64) -> f64 {
        self.alpha.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + self.beta * t + self.gamma
    }
}

fn map_linalg(err: LinalgError, names: &[String]) -> EstimateError {
    match err {
        LinalgError::RankDeficient { columns } => EstimateError::RankDeficient {
            columns: columns.into_iter().map(|i| names[i].clone()).collect(),
        },
        LinalgError::TooFewRows { rows, params } => EstimateError::TooFewRows { rows, params },
        LinalgError::NonFinite => EstimateError::NonFinite,
    }
}

/// Ordinary least squares fit of the outcome on the covariates, the treatment
/// indicator and an intercept. Requires more rows than parameters.
pub fn fit_outcome_model(ds: &CausalDataset, covariates: &[String]) -> Result<LinearOutcomeModel, EstimateError> {
    let mut columns = ds.covariate_columns(covariates)?;
    let y = ds.outcome()?;
    columns.push(ds.numeric(&ds.schema().treatment)?);
    columns.push(vec![1.0; ds.len()]);
    let mut names: Vec<String> = covariates.to_vec();
    names.push(ds.schema().treatment.clone());
    names.push("intercept".to_string());
    let p = columns.len();
    let coef = linalg::least_squares(&columns, &y, p + 1).map_err(|e| map_linalg(e, &names))?;
    Ok(LinearOutcomeModel {
        covariates: covariates.to_vec(),
        alpha: coef[..p - 2].to_vec(),
        beta: coef[p - 2],
        gamma: coef[p - 1],
    })
}

/// Average over units of `f(x_i, 1) − f(x_i, 0)` for the fitted model.
pub fn ate_covariate_adjustment(model: &LinearOutcomeModel, ds: &CausalDataset) -> Result<EffectEstimate, EstimateError> {
    let columns = ds.covariate_columns(&model.covariates).map_err(|e| match e {
        DatasetError::UnknownColumn(_) => EstimateError::CovariateMismatch { expected: model.covariates.clone() },
        other => other.into(),
    })?;
    let n = ds.len();
    let mut x = vec![0.0; columns.len()];
    let mut total = 0.0;
    for i in 0..n {
        for (slot, col) in x.iter_mut().zip(&columns) {
            *slot = col[i];
        }
        total += model.predict(&x, 1.0) - model.predict(&x, 0.0);
    }
    let (n_treated, n_control) = group_counts(ds.treatment());
    Ok(EffectEstimate {
        method: Method::CovariateAdjustment,
        value: total / n as f64,
        n_treated,
        n_control,
        strata: Vec::new(),
        warnings: Vec::new(),
    })
}

/// Linear fit of the outcome on covariates within one treatment arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmModel {
    pub covariates: Vec<String>,
    pub coef: Vec<f64>,
    pub intercept: f64,
}

impl ArmModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.coef.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + self.intercept
    }
}

/// Outcome model(s) from which a conditional effect can be read off.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CateModel {
    Pooled(LinearOutcomeModel),
    PerArm { treated: ArmModel, control: ArmModel },
}

impl CateModel {
    pub fn covariates(&self) -> &[String] {
        match self {
            CateModel::Pooled(m) => &m.covariates,
            CateModel::PerArm { treated, .. } => &treated.covariates,
        }
    }
}

/// Fits one linear outcome model per treatment arm. Each arm needs at least as
/// many units as parameters.
pub fn fit_per_arm(ds: &CausalDataset, covariates: &[String]) -> Result<CateModel, EstimateError> {
    let columns = ds.covariate_columns(covariates)?;
    let y = ds.outcome()?;
    let mut names: Vec<String> = covariates.to_vec();
    names.push("intercept".to_string());
    let fit = |arm: bool, label: &'static str| -> Result<ArmModel, EstimateError> {
        let rows: Vec<usize> = (0..ds.len()).filter(|&r| ds.treatment()[r] == arm).collect();
        if rows.is_empty() {
            return Err(EstimateError::EmptyArm(label));
        }
        let mut cols: Vec<Vec<f64>> = columns.iter().map(|c| rows.iter().map(|&r| c[r]).collect()).collect();
        cols.push(vec![1.0; rows.len()]);
        let ys: Vec<f64> = rows.iter().map(|&r| y[r]).collect();
        let p = cols.len();
        let coef = linalg::least_squares(&cols, &ys, p).map_err(|e| map_linalg(e, &names))?;
        Ok(ArmModel { covariates: covariates.to_vec(), coef: coef[..p - 1].to_vec(), intercept: coef[p - 1] })
    };
    Ok(CateModel::PerArm { treated: fit(true, "treated")?, control: fit(false, "control")? })
}

/// Conditional effect at a covariate profile given as `(name, value)` pairs;
/// the names must match the model covariates exactly (any order).
pub fn cate_plugin(model: &CateModel, profile: &[(&str, f64)]) -> Result<f64, EstimateError> {
    let names = model.covariates();
    let mismatch = || EstimateError::CovariateMismatch { expected: names.to_vec() };
    if profile.len() != names.len() {
        return Err(mismatch());
    }
    let x: Vec<f64> = names
        .iter()
        .map(|n| profile.iter().find(|(k, _)| k == n).map(|p| p.1).ok_or_else(mismatch))
        .collect::<Result<_, _>>()?;
    Ok(match model {
        CateModel::Pooled(m) => m.predict(&x, 1.0) - m.predict(&x, 0.0),
        CateModel::PerArm { treated, control } => treated.predict(&x) - control.predict(&x),
    })
}

/// Logistic model of `P(T = 1 | x)` and the fitted score of every unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropensityModel {
    pub covariates: Vec<String>,
    /// Intercept on the original covariate scale.
    pub intercept: f64,
    /// Slopes on the original covariate scale.
    pub weights: Vec<f64>,
    pub scores: Vec<f64>,
    pub iterations: usize,
}

impl PropensityModel {
    /// A model that hands out the given scores; useful when scores come from
    /// elsewhere.
    pub fn from_scores(scores: Vec<f64>) -> Self {
        Self { covariates: Vec::new(), intercept: 0.0, weights: Vec::new(), scores, iterations: 0 }
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + libm::log1p(libm::exp(-x))
    } else {
        libm::log1p(libm::exp(x))
    }
}

struct LogisticProblem<'a> {
    /// Standardized covariates, column-major.
    z: &'a [Vec<f64>],
    t: &'a [bool],
    lambda: f64,
}

impl LogisticProblem<'_> {
    fn eta(&self, theta: &[f64], i: usize) -> f64 {
        theta[0] + self.z.iter().zip(&theta[1..]).map(|(c, w)| c[i] * w).sum::<f64>()
    }

    fn loss(&self, theta: &[f64]) -> f64 {
        let nll: f64 = (0..self.t.len())
            .map(|i| {
                let eta = self.eta(theta, i);
                if self.t[i] {
                    softplus(-eta)
                } else {
                    softplus(eta)
                }
            })
            .sum();
        nll + 0.5 * self.lambda * theta[1..].iter().map(|w| w * w).sum::<f64>()
    }

    /// Newton direction `H⁻¹ g` and the gradient.
    fn newton(&self, theta: &[f64]) -> Result<(Vec<f64>, Vec<f64>), EstimateError> {
        let p = theta.len();
        let mut grad = vec![0.0; p];
        let mut hess = vec![0.0; p * p];
        let mut row = vec![1.0; p];
        for i in 0..self.t.len() {
            for (j, c) in self.z.iter().enumerate() {
                row[j + 1] = c[i];
            }
            let mu = logistic(self.eta(theta, i));
            let r = mu - if self.t[i] { 1.0 } else { 0.0 };
            let w = mu * (1.0 - mu);
            for a in 0..p {
                grad[a] += r * row[a];
                for b in 0..=a {
                    hess[a * p + b] += w * row[a] * row[b];
                }
            }
        }
        for a in 1..p {
            grad[a] += self.lambda * theta[a];
            hess[a * p + a] += self.lambda;
        }
        for a in 0..p {
            for b in 0..a {
                hess[b * p + a] = hess[a * p + b];
            }
        }
        // Curvature can underflow once scores saturate; a ridge on the Newton
        // system (not on the loss) keeps the factorization defined.
        for a in 0..p {
            hess[a * p + a] += 1e-12;
        }
        let chol = PivotedCholesky::factor(&hess, p, 0.0).map_err(|_| EstimateError::NonFinite)?;
        Ok((chol.solve(&grad), grad))
    }
}

/// Penalized logistic regression of the treatment on the covariates (plus an
/// intercept), fitted by iteratively reweighted least squares (Newton steps
/// with step halving). Covariates are standardized internally, so fitted
/// scores do not depend on affine rescaling of any covariate.
pub fn estimate_propensity(ds: &CausalDataset, covariates: &[String]) -> Result<PropensityModel, EstimateError> {
    require_both_groups(ds.treatment())?;
    let raw = ds.covariate_columns(covariates)?;
    let n = ds.len();
    let mut centers = Vec::with_capacity(raw.len());
    let mut spreads = Vec::with_capacity(raw.len());
    let mut z = Vec::with_capacity(raw.len());
    for (name, col) in covariates.iter().zip(&raw) {
        let m = mean(col);
        let sd = libm::sqrt(col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64);
        if !(sd > 0.0) || !sd.is_finite() {
            return Err(EstimateError::ConstantCovariate(name.clone()));
        }
        z.push(col.iter().map(|v| (v - m) / sd).collect::<Vec<f64>>());
        centers.push(m);
        spreads.push(sd);
    }
    let problem = LogisticProblem { z: &z, t: ds.treatment(), lambda: PROPENSITY_L2 };
    let mut theta = vec![0.0; covariates.len() + 1];
    let mut loss = problem.loss(&theta);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < PROPENSITY_MAX_ITER {
        iterations += 1;
        let (step, grad) = problem.newton(&theta)?;
        let decrement: f64 = step.iter().zip(&grad).map(|(s, g)| s * g).sum();
        if !decrement.is_finite() {
            return Err(EstimateError::NonFinite);
        }
        if decrement <= 1e-20 * (1.0 + loss) {
            converged = true;
            break;
        }
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = theta.iter().zip(&step).map(|(a, s)| a - scale * s).collect();
            let trial_loss = problem.loss(&trial);
            if trial_loss <= loss - 1e-4 * scale * decrement {
                accepted = Some((trial, trial_loss));
                break;
            }
            scale *= 0.5;
        }
        let Some((next, next_loss)) = accepted else {
            // No sufficient decrease left: the loss is flat to machine precision.
            if decrement <= 1e-10 * (1.0 + loss) {
                converged = true;
                break;
            }
            return Err(EstimateError::NoDescent(iterations));
        };
        let change = loss - next_loss;
        theta = next;
        loss = next_loss;
        if change <= 1e-15 * (1.0 + loss) && decrement <= 1e-12 * (1.0 + loss) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(EstimateError::NotConverged(PROPENSITY_MAX_ITER));
    }
    let scores = (0..n)
        .map(|i| logistic(problem.eta(&theta, i)).clamp(SCORE_CLAMP, 1.0 - SCORE_CLAMP))
        .collect();
    let weights: Vec<f64> = theta[1..].iter().zip(&spreads).map(|(w, s)| w / s).collect();
    let intercept = theta[0] - weights.iter().zip(&centers).map(|(w, m)| w * m).sum::<f64>();
    Ok(PropensityModel { covariates: covariates.to_vec(), intercept, weights, scores, iterations })
}

/// Pairs each treated unit (row order) with the control unit of closest score,
/// with replacement; ties go to the lowest control row.
pub fn match_scores(scores: &[f64], treatment: &[bool]) -> Result<Vec<(usize, usize)>, EstimateError> {
    require_both_groups(treatment)?;
    let controls: Vec<usize> = (0..treatment.len()).filter(|&i| !treatment[i]).collect();
    Ok((0..treatment.len())
        .filter(|&i| treatment[i])
        .map(|i| {
            let mut best = controls[0];
            let mut best_d = libm::fabs(scores[i] - scores[best]);
            for &c in &controls[1..] {
                let d = libm::fabs(scores[i] - scores[c]);
                if d < best_d {
                    best = c;
                    best_d = d;
                }
            }
            (i, best)
        })
        .collect())
}

pub fn match_nearest_neighbor(model: &PropensityModel, ds: &CausalDataset) -> Result<Vec<(usize, usize)>, EstimateError> {
    if model.scores.len() != ds.len() {
        return Err(EstimateError::Data(DatasetError::LengthMismatch { expected: ds.len(), found: model.scores.len() }));
    }
    match_scores(&model.scores, ds.treatment())
}

/// Units of one propensity stratum, in row order.
#[derive(Debug, Clone, PartialEq)]
pub struct StratumUnits {
    pub lower: f64,
    pub upper: f64,
    pub units: Vec<usize>,
}

/// Equal-frequency binning of scores into at most `n_strata` non-empty strata.
///
/// Cut values are read off the sorted scores at positions `⌊k·n/S⌋`; a unit's
/// stratum is the number of cut values not exceeding its score, so tied scores
/// never straddle a boundary.
pub fn stratify(scores: &[f64], n_strata: usize) -> Result<Vec<StratumUnits>, EstimateError> {
    if n_strata == 0 {
        return Err(EstimateError::NoStrata);
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(EstimateError::NonFinite);
    }
    let n = scores.len();
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let cuts: Vec<f64> = (1..n_strata).filter_map(|k| sorted.get(k * n / n_strata).copied()).collect();
    let mut bins: Vec<Vec<usize>> = vec![Vec::new(); n_strata];
    for (i, &s) in scores.iter().enumerate() {
        bins[cuts.iter().filter(|&&c| c <= s).count()].push(i);
    }
    Ok(bins
        .into_iter()
        .filter(|b| !b.is_empty())
        .map(|units| {
            let lower = units.iter().map(|&u| scores[u]).fold(f64::INFINITY, f64::min);
            let upper = units.iter().map(|&u| scores[u]).fold(f64::NEG_INFINITY, f64::max);
            StratumUnits { lower, upper, units }
        })
        .collect())
}

/// How per-stratum effects are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StratumWeighting {
    /// Weighted by stratum size.
    #[default]
    Size,
    /// Plain average of stratum effects.
    Equal,
}

/// Strata containing both groups, plus warnings for the ones dropped.
fn retained_strata(strata: Vec<StratumUnits>, treatment: &[bool]) -> (Vec<StratumUnits>, Vec<String>) {
    let mut kept = Vec::new();
    let mut warnings = Vec::new();
    for (k, s) in strata.into_iter().enumerate() {
        let (t, c) = group_counts(&s.units.iter().map(|&u| treatment[u]).collect::<Vec<_>>());
        if t == 0 || c == 0 {
            let missing = if t == 0 { "treated" } else { "control" };
            warnings.push(format!(
                "stratum {} [{:?}, {:?}] dropped: no {missing} units ({} units)",
                k + 1,
                s.lower,
                s.upper,
                s.units.len()
            ));
        } else {
            kept.push(s);
        }
    }
    (kept, warnings)
}

/// Stratify on propensity scores, take the difference in outcome means within
/// each stratum that holds both groups, and average the stratum effects.
pub fn ate_psm_stratified(
    ds: &CausalDataset,
    model: &PropensityModel,
    n_strata: usize,
    weighting: StratumWeighting,
) -> Result<EffectEstimate, EstimateError> {
    if model.scores.len() != ds.len() {
        return Err(EstimateError::Data(DatasetError::LengthMismatch { expected: ds.len(), found: model.scores.len() }));
    }
    let y = ds.outcome()?;
    let t = ds.treatment();
    let (kept, warnings) = retained_strata(stratify(&model.scores, n_strata)?, t);
    if kept.is_empty() {
        return Err(EstimateError::AllStrataDegenerate);
    }
    let total: usize = kept.iter().map(|s| s.units.len()).sum();
    let mut strata = Vec::with_capacity(kept.len());
    let mut value = 0.0;
    let (mut n_treated, mut n_control) = (0, 0);
    for s in &kept {
        let (effect, nt, nc) = group_difference(&y, t, s.units.iter().copied());
        let weight = match weighting {
            StratumWeighting::Size => s.units.len() as f64 / total as f64,
            StratumWeighting::Equal => 1.0 / kept.len() as f64,
        };
        value += weight * effect;
        n_treated += nt;
        n_control += nc;
        strata.push(Stratum { lower: s.lower, upper: s.upper, effect, size: s.units.len(), n_treated: nt, n_control: nc });
    }
    Ok(EffectEstimate { method: Method::PsmStratified, value, n_treated, n_control, strata, warnings })
}

/// Sample on which covariate balance is assessed.
#[derive(Debug, Clone, Copy)]
pub enum BalanceSample<'a> {
    /// Treated units and their matched controls (controls counted with multiplicity).
    Matched(&'a [(usize, usize)]),
    /// All units of the given strata.
    Strata(&'a [StratumUnits]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateBalance {
    pub covariate: String,
    pub mean_treated: f64,
    pub mean_control: f64,
    /// Standardized mean difference; infinite when the pooled variance is zero
    /// but the means differ.
    pub smd: f64,
    pub flagged: bool,
}

/// Standardized mean difference `(m_T − m_C) / √((s_T² + s_C²)/2)`, with 0/0
/// read as 0.
pub fn standardized_mean_difference(treated: &[f64], control: &[f64]) -> f64 {
    let diff = mean(treated) - mean(control);
    let pooled = libm::sqrt((sample_variance(treated) + sample_variance(control)) / 2.0);
    if pooled > 0.0 {
        diff / pooled
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY.copysign(diff)
    }
}

pub fn balance_diagnostics(
    sample: BalanceSample<'_>,
    ds: &CausalDataset,
    covariates: &[String],
) -> Result<Vec<CovariateBalance>, EstimateError> {
    let (treated_rows, control_rows): (Vec<usize>, Vec<usize>) = match sample {
        BalanceSample::Matched(pairs) => (pairs.iter().map(|p| p.0).collect(), pairs.iter().map(|p| p.1).collect()),
        BalanceSample::Strata(strata) => {
            let units = strata.iter().flat_map(|s| s.units.iter().copied());
            units.partition(|&u| ds.treatment()[u])
        }
    };
    let columns = ds.covariate_columns(covariates)?;
    Ok(covariates
        .iter()
        .zip(columns)
        .map(|(name, col)| {
            let a: Vec<f64> = treated_rows.iter().map(|&r| col[r]).collect();
            let b: Vec<f64> = control_rows.iter().map(|&r| col[r]).collect();
            let smd = standardized_mean_difference(&a, &b);
            CovariateBalance {
                covariate: name.clone(),
                mean_treated: mean(&a),
                mean_control: mean(&b),
                smd,
                flagged: !(libm::fabs(smd) <= SMD_THRESHOLD),
            }
        })
        .collect())
}

/// A complete estimation recipe, runnable against any dataset with the
/// named covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum EstimatorKind {
    DiffInMeans,
    CovariateAdjustment { covariates: Vec<String> },
    PsmStratified { covariates: Vec<String>, n_strata: usize, weighting: StratumWeighting },
}

impl EstimatorKind {
    pub fn method(&self) -> Method {
        match self {
            EstimatorKind::DiffInMeans => Method::DiffInMeans,
            EstimatorKind::CovariateAdjustment { .. } => Method::CovariateAdjustment,
            EstimatorKind::PsmStratified { .. } => Method::PsmStratified,
        }
    }

    pub fn estimate(&self, ds: &CausalDataset) -> Result<EffectEstimate, EstimateError> {
        match self {
            EstimatorKind::DiffInMeans => ate_difference_in_means(ds),
            EstimatorKind::CovariateAdjustment { covariates } => {
                ate_covariate_adjustment(&fit_outcome_model(ds, covariates)?, ds)
            }
            EstimatorKind::PsmStratified { covariates, n_strata, weighting } => {
                let model = estimate_propensity(ds, covariates)?;
                ate_psm_stratified(ds, &model, *n_strata, *weighting)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(x: &[f64], t: &[u8], y: &[f64]) -> CausalDataset {
        CausalDataset::from_arrays(&[("x", x.to_vec())], t.iter().map(|&v| v == 1).collect(), y.to_vec()).unwrap()
    }

    fn x() -> Vec<String> {
        vec!["x".to_string()]
    }

    #[test]
    fn diff_in_means_by_hand() {
        let d = ds(&[0.0; 4], &[1, 1, 0, 0], &[3.0, 5.0, 1.0, 3.0]);
        let e = ate_difference_in_means(&d).unwrap();
        assert_eq!(e.value, 2.0);
        assert_eq!((e.n_treated, e.n_control), (2, 2));
        let flat = ds(&[0.0; 3], &[1, 0, 1], &[7.0; 3]);
        assert_eq!(ate_difference_in_means(&flat).unwrap().value, 0.0);
        let one_sided = ds(&[0.0; 2], &[1, 1], &[1.0, 2.0]);
        assert_eq!(
            ate_difference_in_means(&one_sided),
            Err(EstimateError::EmptyGroup { treated: 2, control: 0 })
        );
    }

    #[test]
    fn zero_variance_covariate_is_rank_deficient() {
        let d = ds(&[2.0; 5], &[0, 1, 0, 1, 1], &[1.0, 2.0, 3.0, 4.0, 6.0]);
        match fit_outcome_model(&d, &x()) {
            Err(EstimateError::RankDeficient { columns }) => {
                assert_eq!(columns, vec!["x".to_string(), "intercept".to_string()])
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn outcome_model_needs_more_rows_than_parameters() {
        let d = ds(&[0.0, 1.0, 2.0], &[0, 1, 0], &[1.0, 2.0, 3.0]);
        assert_eq!(fit_outcome_model(&d, &x()), Err(EstimateError::TooFewRows { rows: 3, params: 3 }));
    }

    #[test]
    fn adjustment_with_null_beta() {
        let m = LinearOutcomeModel { covariates: x(), alpha: vec![4.0], beta: 0.0, gamma: 2.0 };
        let d = ds(&[1.0, 2.0, 3.0], &[0, 1, 0], &[0.0; 3]);
        assert_eq!(ate_covariate_adjustment(&m, &d).unwrap().value, 0.0);
        let other = LinearOutcomeModel { covariates: vec!["z".into()], alpha: vec![1.0], beta: 1.0, gamma: 0.0 };
        assert!(matches!(ate_covariate_adjustment(&other, &d), Err(EstimateError::CovariateMismatch { .. })));
    }

    #[test]
    fn pooled_cate_is_beta_everywhere() {
        let m = CateModel::Pooled(LinearOutcomeModel { covariates: x(), alpha: vec![2.0], beta: 3.0, gamma: 1.0 });
        for v in [-5.0, 0.0, 12.5] {
            assert_eq!(cate_plugin(&m, &[("x", v)]).unwrap(), 3.0);
        }
        assert!(cate_plugin(&m, &[("y", 1.0)]).is_err());
        assert!(cate_plugin(&m, &[]).is_err());
    }

    #[test]
    fn per_arm_requires_both_arms() {
        let d = ds(&[1.0, 2.0], &[1, 1], &[1.0, 2.0]);
        assert_eq!(fit_per_arm(&d, &x()), Err(EstimateError::EmptyArm("control")));
    }

    #[test]
    fn per_arm_symmetric_arms_give_zero() {
        let d = ds(&[1.0, 2.0, 4.0, 1.0, 2.0, 4.0], &[1, 1, 1, 0, 0, 0], &[1.0, 5.0, 2.0, 1.0, 5.0, 2.0]);
        let m = fit_per_arm(&d, &x()).unwrap();
        for v in [0.0, 3.0, -2.0] {
            assert!(cate_plugin(&m, &[("x", v)]).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn matching_examples() {
        let scores = [0.3, 0.8, 0.25, 0.6, 0.9];
        let t = [true, true, false, false, false];
        assert_eq!(match_scores(&scores, &t).unwrap(), vec![(0, 2), (1, 4)]);
        let single = [0.1, 0.7, 0.4];
        assert_eq!(match_scores(&single, &[true, true, false]).unwrap(), vec![(0, 2), (1, 2)]);
        let tie = [0.4, 0.5, 0.6];
        assert_eq!(match_scores(&tie, &[false, true, false]).unwrap(), vec![(1, 0)]);
    }

    #[test]
    fn smd_cases() {
        assert_eq!(standardized_mean_difference(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), 0.0);
        // means 2 and 1, both sample std 1
        let smd = standardized_mean_difference(&[1.0, 2.0, 3.0], &[0.0, 1.0, 2.0]);
        assert!((smd - 1.0).abs() < 1e-15);
        assert_eq!(standardized_mean_difference(&[4.0, 4.0], &[4.0]), 0.0);
        assert_eq!(standardized_mean_difference(&[5.0, 5.0], &[4.0]), f64::INFINITY);
    }

    #[test]
    fn balance_flags_imbalance() {
        let d = ds(&[1.0, 2.0, 3.0, 0.0, 1.0, 2.0], &[1, 1, 1, 0, 0, 0], &[0.0; 6]);
        let pairs = [(0, 3), (1, 4), (2, 5)];
        let b = balance_diagnostics(BalanceSample::Matched(&pairs), &d, &x()).unwrap();
        assert!((b[0].smd - 1.0).abs() < 1e-15);
        assert!(b[0].flagged);
    }

    #[test]
    fn stratification_keeps_ties_together() {
        let strata = stratify(&[0.5; 10], 5).unwrap();
        assert_eq!(strata.len(), 1);
        assert_eq!(strata[0].units.len(), 10);
        let spread: Vec<f64> = (0..10).map(|i| i as f64 / 10.0).collect();
        let strata = stratify(&spread, 5).unwrap();
        assert_eq!(strata.iter().map(|s| s.units.len()).collect::<Vec<_>>(), vec![2; 5]);
        assert_eq!(stratify(&spread, 0), Err(EstimateError::NoStrata));
    }

    #[test]
    fn weighted_stratum_average() {
        // stratum A: 4 units effect 2; stratum B: 6 units effect 4.
        let scores = [0.1, 0.1, 0.1, 0.1, 0.9, 0.9, 0.9, 0.9, 0.9, 0.9];
        let t = [1, 1, 0, 0, 1, 1, 1, 0, 0, 0];
        let y = [3.0, 3.0, 1.0, 1.0, 5.0, 5.0, 5.0, 1.0, 1.0, 1.0];
        let d = ds(&[0.0; 10], &t, &y);
        let m = PropensityModel::from_scores(scores.to_vec());
        let e = ate_psm_stratified(&d, &m, 2, StratumWeighting::Size).unwrap();
        assert!((e.value - 3.2).abs() < 1e-12);
        assert_eq!(e.strata.iter().map(|s| s.size).sum::<usize>(), 10);
        let plain = ate_psm_stratified(&d, &m, 2, StratumWeighting::Equal).unwrap();
        assert!((plain.value - 3.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_strata_are_dropped() {
        let scores = [0.1, 0.1, 0.9, 0.9, 0.9, 0.9];
        let d = ds(&[0.0; 6], &[0, 0, 1, 0, 1, 0], &[1.0, 1.0, 4.0, 2.0, 4.0, 2.0]);
        let m = PropensityModel::from_scores(scores.to_vec());
        let e = ate_psm_stratified(&d, &m, 2, StratumWeighting::Size).unwrap();
        assert_eq!(e.value, 2.0);
        assert_eq!(e.warnings.len(), 1);
        assert_eq!((e.n_treated, e.n_control), (2, 2));
        let all_bad = ds(&[0.0; 4], &[0, 0, 1, 1], &[0.0; 4]);
        let m = PropensityModel::from_scores(vec![0.1, 0.1, 0.9, 0.9]);
        assert_eq!(ate_psm_stratified(&all_bad, &m, 2, StratumWeighting::Size), Err(EstimateError::AllStrataDegenerate));
    }

    #[test]
    fn independent_half_treated_scores_are_one_half() {
        let d = ds(&[1.0, 1.0, 2.0, 2.0, 3.0, 3.0], &[0, 1, 1, 0, 0, 1], &[0.0; 6]);
        let m = estimate_propensity(&d, &x()).unwrap();
        for s in &m.scores {
            assert!((s - 0.5).abs() < 1e-6, "{s}");
        }
    }

    #[test]
    fn separated_data_stays_finite() {
        let d = ds(&[-3.0, -2.0, -1.0, 1.0, 2.0, 3.0], &[0, 0, 0, 1, 1, 1], &[0.0; 6]);
        let m = estimate_propensity(&d, &x()).unwrap();
        assert!(m.weights[0].is_finite() && m.intercept.is_finite());
        for (s, t) in m.scores.iter().zip(d.treatment()) {
            assert!(*s >= SCORE_CLAMP && *s <= 1.0 - SCORE_CLAMP);
            if *t {
                assert!(*s > 0.99);
            } else {
                assert!(*s < 0.01);
            }
        }
    }

    #[test]
    fn method_tokens_round_trip() {
        for tok in Method::TOKENS {
            assert_eq!(tok.parse::<Method>().unwrap().token(), tok);
        }
        let err = "ipw".parse::<Method>().unwrap_err();
        assert!(err.contains("diff_in_means") && err.contains("psm_stratified"));
    }
}
