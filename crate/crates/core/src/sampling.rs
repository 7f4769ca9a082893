//! Perturbation points for min/max estimation.
//!
//! Only the features in the perturbed set move; every other coordinate keeps
//! the instance's value. When the full grid over the perturbed features fits in
//! the budget it is enumerated. Otherwise the points come from a fixed stream
//! that is cut at the budget, so a larger budget always evaluates a superset:
//!
//! 1. the instance itself;
//! 2. one-at-a-time sweeps of each feature over its grid;
//! 3. a coarse grid (numeric features at `lo`, the instance value and `hi`,
//!    categorical features at every level), when it has at most
//!    `categorical_limit` points;
//! 4. Latin-hypercube batches of [`LHS_BATCH`] points, each with its own seed.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{FeatureKind, FeatureSchema};
use crate::vocabulary::IndexSet;

pub const LHS_BATCH: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("the sample budget must be at least one evaluation")]
    ZeroBudget,
    #[error("numeric grids need at least two points, got {0}")]
    GridTooSmall(usize),
    #[error("feature index {index} is outside a schema of {n_features} features")]
    OutOfSchema { index: usize, n_features: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Maximum number of model evaluations per perturbed set.
    pub budget: usize,
    /// Equally spaced points per numeric feature, endpoints included.
    pub grid_points: usize,
    /// Largest coarse grid added to the sampled stream.
    pub categorical_limit: usize,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            budget: 10_000,
            grid_points: 21,
            categorical_limit: 10_000,
            seed: 42,
        }
    }
}

impl SamplerConfig {
    pub fn with_seed(self, seed: u64) -> Self {
        SamplerConfig { seed, ..self }
    }

    pub fn with_budget(self, budget: usize) -> Self {
        SamplerConfig { budget, ..self }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    /// Every grid point over the perturbed features was evaluated.
    Exhaustive,
    /// A budget-limited subset was evaluated.
    Sampled,
}

#[derive(Clone, Copy, Debug)]
enum Axis {
    Levels(usize),
    Range(f64, f64),
}

impl Axis {
    fn grid(self, points: usize) -> Vec<f64> {
        match self {
            Axis::Levels(n) => (0..n).map(|l| l as f64).collect(),
            Axis::Range(lo, hi) => (0..points)
                .map(|k| {
                    if k + 1 == points {
                        hi
                    } else {
                        lo + (hi - lo) * k as f64 / (points - 1) as f64
                    }
                })
                .collect(),
        }
    }

    /// Maps `t ∈ [0, 1)` onto the axis.
    fn at(self, t: f64) -> f64 {
        match self {
            Axis::Levels(n) => ((t * n as f64) as usize).min(n - 1) as f64,
            Axis::Range(lo, hi) => lo + t * (hi - lo),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointSet {
    pub points: Vec<Vec<f64>>,
    pub mode: SamplingMode,
}

fn axes(schema: &FeatureSchema, s: &IndexSet) -> Result<Vec<(usize, Axis)>, SamplerError> {
    s.indices()
        .iter()
        .map(|&i| {
            if i >= schema.len() {
                return Err(SamplerError::OutOfSchema {
                    index: i,
                    n_features: schema.len(),
                });
            }
            Ok(match &schema.feature(i).kind {
                FeatureKind::Categorical { levels } => (i, Axis::Levels(levels.len())),
                FeatureKind::Numeric { lo, hi } => (i, Axis::Range(*lo, *hi)),
            })
        })
        .collect()
}

/// Cartesian product of per-feature values, or `None` when it exceeds `limit`.
fn product(x: &[f64], values: &[(usize, Vec<f64>)], limit: usize) -> Option<Vec<Vec<f64>>> {
    let mut size: usize = 1;
    for (_, v) in values {
        size = size.checked_mul(v.len()).filter(|&n| n <= limit)?;
    }
    let mut out = Vec::with_capacity(size);
    let mut digits = vec![0usize; values.len()];
    for _ in 0..size {
        let mut p = x.to_vec();
        for ((i, v), &d) in values.iter().zip(&digits) {
            p[*i] = v[d];
        }
        out.push(p);
        for (d, (_, v)) in digits.iter_mut().zip(values).rev() {
            *d += 1;
            if *d < v.len() {
                break;
            }
            *d = 0;
        }
    }
    Some(out)
}

/// Points at which to evaluate the model when perturbing the features in `s`
/// around `x`. The first point is always `x` itself.
pub fn perturbation_points(
    schema: &FeatureSchema,
    x: &[f64],
    s: &IndexSet,
    config: &SamplerConfig,
) -> Result<PointSet, SamplerError> {
    if config.budget == 0 {
        return Err(SamplerError::ZeroBudget);
    }
    if config.grid_points < 2 {
        return Err(SamplerError::GridTooSmall(config.grid_points));
    }
    let axes = axes(schema, s)?;
    let grids: Vec<(usize, Vec<f64>)> = axes.iter().map(|&(i, a)| (i, a.grid(config.grid_points))).collect();

    // The grid plus `x` must fit in the budget.
    if let Some(grid) = product(x, &grids, config.budget - 1) {
        let mut points = Vec::with_capacity(grid.len() + 1);
        points.push(x.to_vec());
        points.extend(grid.into_iter().filter(|p| p.as_slice() != x));
        return Ok(PointSet {
            points,
            mode: SamplingMode::Exhaustive,
        });
    }

    let budget = config.budget;
    let mut points = Vec::with_capacity(budget);
    points.push(x.to_vec());
    'sweeps: for (i, values) in &grids {
        for &v in values {
            if points.len() >= budget {
                break 'sweeps;
            }
            let mut p = x.to_vec();
            p[*i] = v;
            points.push(p);
        }
    }
    if points.len() < budget {
        let coarse: Vec<(usize, Vec<f64>)> = axes
            .iter()
            .map(|&(i, a)| match a {
                Axis::Levels(_) => (i, a.grid(2)),
                Axis::Range(lo, hi) => {
                    let mut v = vec![lo, x[i], hi];
                    v.dedup();
                    (i, v)
                }
            })
            .collect();
        if let Some(grid) = product(x, &coarse, config.categorical_limit) {
            points.extend(grid.into_iter().take(budget - points.len()));
        }
    }
    let mut batch = 0u64;
    while points.len() < budget {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(batch);
        let columns: Vec<Vec<f64>> = axes
            .iter()
            .map(|_| {
                let mut strata: Vec<usize> = (0..LHS_BATCH).collect();
                strata.shuffle(&mut rng);
                strata
                    .into_iter()
                    .map(|k| (k as f64 + rng.random::<f64>()) / LHS_BATCH as f64)
                    .collect()
            })
            .collect();
        for row in 0..LHS_BATCH.min(budget - points.len()) {
            let mut p = x.to_vec();
            for ((i, axis), column) in axes.iter().zip(&columns) {
                p[*i] = axis.at(column[row]);
            }
            points.push(p);
        }
        batch += 1;
    }
    Ok(PointSet {
        points,
        mode: SamplingMode::Sampled,
    })
}
