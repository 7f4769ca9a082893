//! Contextual Importance (CI), Contextual Utility (CU) and contextual influence.
//!
//! For an instance `x`, a perturbed feature set `s` and a target set
//! `target ⊇ s`:
//!
//! ```text
//! CI = (ymax_s - ymin_s) / (ymax_target - ymin_target)
//! CU = |(y(x) - yumin_s) / (ymax_s - ymin_s)|     yumin = ymin if A > 0 else ymax
//! φ  = CI · (CU - φ0)
//! ```
//!
//! where `ymin_s`/`ymax_s` are the smallest/largest outputs seen while moving
//! only the features in `s` and `A` is the slope of the output's utility map.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataError, Instance};
use crate::model::{Predictor, Task};
use crate::sampling::{perturbation_points, SamplerConfig, SamplerError, SamplingMode};
use crate::vocabulary::{IndexSet, LevelSelector, NamedSet, Vocabulary, VocabularyError};

/// Output ranges narrower than this are treated as flat.
pub const RANGE_TOLERANCE: f64 = 1e-12;

/// Utility assigned to a flat range.
pub const NEUTRAL_UTILITY: f64 = 0.5;

pub const DEFAULT_BASELINE: f64 = 0.5;

#[derive(Debug, Error)]
pub enum CiuError {
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Vocabulary(#[from] VocabularyError),
    #[error("feature set {s} is not contained in the target set {target}")]
    NotSubset { s: IndexSet, target: IndexSet },
    #[error("feature index {index} is outside a schema of {n_features} features")]
    OutOfSchema { index: usize, n_features: usize },
    #[error("output {index} does not exist; the model has {n_outputs} outputs")]
    OutputOutOfRange { index: usize, n_outputs: usize },
    #[error("output {output} does not change when the target set {target} is perturbed (range {range:e})")]
    DegenerateTarget { output: usize, target: IndexSet, range: f64 },
    #[error("regression outputs need an explicit utility map")]
    MissingUtilityMap,
    #[error("utility map slope must be finite and nonzero, got {0}")]
    InvalidUtilityMap(f64),
    #[error("baseline must lie in [0, 1], got {0}")]
    InvalidBaseline(f64),
    #[error("unknown concept `{0}`")]
    UnknownConcept(String),
    #[error("concept `{0}` has a single part and cannot be drilled into")]
    SingletonConcept(String),
    #[error("weights must be finite and non-negative")]
    InvalidWeights,
    #[error("the target weights sum to zero")]
    ZeroDenominator,
}

/// `u(y) = a·y + b`, mapping an output onto a utility scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UtilityMap {
    pub a: f64,
    pub b: f64,
}

impl UtilityMap {
    pub const IDENTITY: UtilityMap = UtilityMap { a: 1.0, b: 0.0 };

    pub fn new(a: f64, b: f64) -> Result<Self, CiuError> {
        if !a.is_finite() || a == 0.0 || !b.is_finite() {
            return Err(CiuError::InvalidUtilityMap(a));
        }
        Ok(UtilityMap { a, b })
    }

    pub fn apply(&self, y: f64) -> f64 {
        self.a * y + self.b
    }
}

impl Default for UtilityMap {
    fn default() -> Self {
        UtilityMap::IDENTITY
    }
}

/// Output extremes seen while perturbing a feature set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinMaxEstimate {
    pub ymin: Vec<f64>,
    pub ymax: Vec<f64>,
    /// Outputs at the unperturbed instance.
    pub y: Vec<f64>,
    pub n_evaluations: usize,
    pub mode: SamplingMode,
}

impl MinMaxEstimate {
    pub fn range(&self, j: usize) -> f64 {
        self.ymax[j] - self.ymin[j]
    }

    /// Widens the extremes with another estimate of the same instance.
    pub fn absorb(&mut self, other: &MinMaxEstimate) {
        for j in 0..self.ymin.len() {
            self.ymin[j] = self.ymin[j].min(other.ymin[j]);
            self.ymax[j] = self.ymax[j].max(other.ymax[j]);
        }
    }
}

fn check_output<P: Predictor + ?Sized>(model: &P, j: usize) -> Result<(), CiuError> {
    let n_outputs = model.n_outputs();
    if j >= n_outputs {
        return Err(CiuError::OutputOutOfRange { index: j, n_outputs });
    }
    Ok(())
}

fn check_set<P: Predictor + ?Sized>(model: &P, s: &IndexSet) -> Result<(), CiuError> {
    let n_features = model.schema().len();
    match s.indices().last() {
        Some(&index) if index >= n_features => Err(CiuError::OutOfSchema { index, n_features }),
        _ => Ok(()),
    }
}

fn check_subset(s: &IndexSet, target: &IndexSet) -> Result<(), CiuError> {
    if s.is_subset_of(target) {
        Ok(())
    } else {
        Err(CiuError::NotSubset {
            s: s.clone(),
            target: target.clone(),
        })
    }
}

/// Evaluates the model at every perturbation point of `s` and records the
/// output extremes. Evaluation runs in parallel; the reduction is min/max, so
/// the result does not depend on scheduling.
pub fn estimate_minmax<P: Predictor + ?Sized>(
    model: &P,
    x: &Instance,
    s: &IndexSet,
    config: &SamplerConfig,
) -> Result<MinMaxEstimate, CiuError> {
    model.schema().validate(x.values())?;
    check_set(model, s)?;
    let set = perturbation_points(model.schema(), x.values(), s, config)?;
    let m = model.n_outputs();
    let y = model.predict_values(x.values());
    let (ymin, ymax) = set
        .points
        .par_iter()
        .map(|p| model.predict_values(p))
        .fold(
            || (vec![f64::INFINITY; m], vec![f64::NEG_INFINITY; m]),
            |(mut lo, mut hi), out| {
                for j in 0..m {
                    lo[j] = lo[j].min(out[j]);
                    hi[j] = hi[j].max(out[j]);
                }
                (lo, hi)
            },
        )
        .reduce(
            || (vec![f64::INFINITY; m], vec![f64::NEG_INFINITY; m]),
            |(mut lo, mut hi), (l, h)| {
                for j in 0..m {
                    lo[j] = lo[j].min(l[j]);
                    hi[j] = hi[j].max(h[j]);
                }
                (lo, hi)
            },
        );
    Ok(MinMaxEstimate {
        ymin,
        ymax,
        y,
        n_evaluations: set.points.len(),
        mode: set.mode,
    })
}

/// CI of `s` relative to `target` for output `j`. The target's extremes are
/// widened with those seen for `s`, so the ratio never exceeds one.
pub fn contextual_importance<P: Predictor + ?Sized>(
    model: &P,
    x: &Instance,
    s: &IndexSet,
    target: &IndexSet,
    j: usize,
    config: &SamplerConfig,
) -> Result<f64, CiuError> {
    check_output(model, j)?;
    check_subset(s, target)?;
    let own = estimate_minmax(model, x, s, config)?;
    let mut whole = estimate_minmax(model, x, target, config)?;
    whole.absorb(&own);
    let range = whole.range(j);
    if range < RANGE_TOLERANCE {
        return Err(CiuError::DegenerateTarget {
            output: j,
            target: target.clone(),
            range,
        });
    }
    Ok(importance_ratio(own.range(j), range))
}

fn importance_ratio(part: f64, whole: f64) -> f64 {
    (part / whole).clamp(0.0, 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UtilityValue {
    pub value: f64,
    /// The perturbed range was flat; `value` is [`NEUTRAL_UTILITY`].
    pub degenerate: bool,
}

/// CU of output `j` from an existing estimate.
pub fn utility_from_estimate(est: &MinMaxEstimate, j: usize, map: UtilityMap) -> UtilityValue {
    let range = est.range(j);
    if range < RANGE_TOLERANCE {
        return UtilityValue {
            value: NEUTRAL_UTILITY,
            degenerate: true,
        };
    }
    let yumin = if map.a > 0.0 { est.ymin[j] } else { est.ymax[j] };
    UtilityValue {
        value: ((est.y[j] - yumin) / range).abs().clamp(0.0, 1.0),
        degenerate: false,
    }
}

pub fn contextual_utility<P: Predictor + ?Sized>(
    model: &P,
    x: &Instance,
    s: &IndexSet,
    j: usize,
    map: UtilityMap,
    config: &SamplerConfig,
) -> Result<UtilityValue, CiuError> {
    check_output(model, j)?;
    let est = estimate_minmax(model, x, s, config)?;
    Ok(utility_from_estimate(&est, j, map))
}

/// `ci · (cu - baseline)`.
pub fn contextual_influence(ci: f64, cu: f64, baseline: f64) -> f64 {
    ci * (cu - baseline)
}

/// `Σ_{i∈s} w_i / Σ_{i∈target} w_i`: the CI of `s` in a linear model with
/// weights `w` and unit-range utilities.
pub fn linear_joint_importance(weights: &[f64], s: &IndexSet, target: &IndexSet) -> Result<f64, CiuError> {
    check_subset(s, target)?;
    if let Some(&index) = target.indices().last().filter(|&&i| i >= weights.len()) {
        return Err(CiuError::OutOfSchema {
            index,
            n_features: weights.len(),
        });
    }
    if target.indices().iter().any(|&i| !weights[i].is_finite() || weights[i] < 0.0) {
        return Err(CiuError::InvalidWeights);
    }
    let sum = |set: &IndexSet| set.indices().iter().map(|&i| weights[i]).sum::<f64>();
    let denominator = sum(target);
    if denominator == 0.0 {
        return Err(CiuError::ZeroDenominator);
    }
    Ok(sum(s) / denominator)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CiuConfig {
    pub sampler: SamplerConfig,
    /// Reference utility for influence.
    pub baseline: f64,
    /// Required for regression outputs; identity otherwise.
    pub utility: Option<UtilityMap>,
}

impl Default for CiuConfig {
    fn default() -> Self {
        CiuConfig {
            sampler: SamplerConfig::default(),
            baseline: DEFAULT_BASELINE,
            utility: None,
        }
    }
}

impl CiuConfig {
    pub fn utility_for(&self, task: Task) -> Result<UtilityMap, CiuError> {
        match (self.utility, task) {
            (Some(map), _) => UtilityMap::new(map.a, map.b),
            (None, Task::Classification | Task::Utility) => Ok(UtilityMap::IDENTITY),
            (None, Task::Regression) => Err(CiuError::MissingUtilityMap),
        }
    }

    fn check(&self) -> Result<(), CiuError> {
        if !(0.0..=1.0).contains(&self.baseline) {
            return Err(CiuError::InvalidBaseline(self.baseline));
        }
        Ok(())
    }
}

/// CI, CU and influence of one feature set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CiuResult {
    pub concept: String,
    pub features: IndexSet,
    pub target: IndexSet,
    pub output: usize,
    pub ci: f64,
    pub cu: f64,
    pub influence: f64,
    pub baseline: f64,
    pub ymin: f64,
    pub ymax: f64,
    pub y: f64,
    /// The perturbed or the target range was flat.
    pub degenerate: bool,
    pub mode: SamplingMode,
    pub n_evaluations: usize,
}

impl CiuResult {
    /// Fills in `influence` from `ci`, `cu` and `baseline`.
    #[allow(clippy::too_many_arguments)]
    fn build(
        set: &NamedSet,
        target: &IndexSet,
        j: usize,
        ci: f64,
        cu: UtilityValue,
        degenerate_target: bool,
        baseline: f64,
        est: &MinMaxEstimate,
    ) -> CiuResult {
        CiuResult {
            concept: set.name.clone(),
            features: set.features.clone(),
            target: target.clone(),
            output: j,
            ci,
            cu: cu.value,
            influence: contextual_influence(ci, cu.value, baseline),
            baseline,
            ymin: est.ymin[j],
            ymax: est.ymax[j],
            y: est.y[j],
            degenerate: cu.degenerate || degenerate_target,
            mode: est.mode,
            n_evaluations: est.n_evaluations,
        }
    }
}

fn order_results(results: &mut [CiuResult]) {
    results.sort_by(|a, b| b.ci.total_cmp(&a.ci).then_with(|| a.concept.cmp(&b.concept)));
}

/// CIU of each named set relative to `target`, sorted by CI (descending) then
/// name. The target's extremes are widened with every set's extremes so all
/// results share one denominator. When output `j` is flat over the whole
/// target, every result gets CI 0, the neutral CU and the degenerate flag.
pub fn explain_sets<P: Predictor + ?Sized>(
    model: &P,
    x: &Instance,
    sets: &[NamedSet],
    target: &IndexSet,
    j: usize,
    config: &CiuConfig,
) -> Result<Vec<CiuResult>, CiuError> {
    config.check()?;
    check_output(model, j)?;
    let map = config.utility_for(model.task())?;
    for set in sets {
        check_subset(&set.features, target)?;
    }
    let mut whole = estimate_minmax(model, x, target, &config.sampler)?;
    let estimates = sets
        .iter()
        .map(|set| {
            if set.features == *target {
                Ok(whole.clone())
            } else {
                estimate_minmax(model, x, &set.features, &config.sampler)
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    for est in &estimates {
        whole.absorb(est);
    }
    let range = whole.range(j);
    let flat = range < RANGE_TOLERANCE;
    let mut results: Vec<CiuResult> = sets
        .iter()
        .zip(&estimates)
        .map(|(set, est)| {
            let (ci, cu) = if flat {
                (
                    0.0,
                    UtilityValue {
                        value: NEUTRAL_UTILITY,
                        degenerate: true,
                    },
                )
            } else {
                (importance_ratio(est.range(j), range), utility_from_estimate(est, j, map))
            };
            CiuResult::build(set, target, j, ci, cu, flat, config.baseline, est)
        })
        .collect();
    order_results(&mut results);
    Ok(results)
}

/// CIU of the concepts at one abstraction level, relative to all features.
pub fn explain_instance<P: Predictor + ?Sized>(
    model: &P,
    x: &Instance,
    vocabulary: &Vocabulary,
    selector: LevelSelector,
    j: usize,
    config: &CiuConfig,
) -> Result<Vec<CiuResult>, CiuError> {
    if vocabulary.is_empty() {
        return Err(VocabularyError::Empty.into());
    }
    let sets = vocabulary.select(selector, model.schema())?;
    explain_sets(model, x, &sets, &IndexSet::all(model.schema().len()), j, config)
}

/// CIU of each part of `concept`, relative to the concept's own features.
pub fn drilldown<P: Predictor + ?Sized>(
    model: &P,
    x: &Instance,
    vocabulary: &Vocabulary,
    concept: &str,
    j: usize,
    config: &CiuConfig,
) -> Result<Vec<CiuResult>, CiuError> {
    let Some(parent) = vocabulary.concept(concept) else {
        return Err(CiuError::UnknownConcept(concept.to_string()));
    };
    if parent.parts.len() < 2 {
        return Err(CiuError::SingletonConcept(concept.to_string()));
    }
    let parts = vocabulary.parts_of(concept, model.schema())?;
    explain_sets(model, x, &parts, &parent.features, j, config)
}
