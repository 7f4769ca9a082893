//! Shapley-value attributions, used as a reference point for CIU.
//!
//! - [`linear_shapley`]: closed form `w_i (x_i - E[X_i])` for linear models.
//! - [`exact_shapley_game`]: exact values of a small cooperative game.
//! - [`exact_model_shapley`]: exact values of the game "features outside the
//!   coalition are replaced by background rows, averaged".
//! - [`monte_carlo_shapley`]: permutation sampling for any predictor.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coalition::{all_coalitions, Coalition};
use crate::data::{DataError, Dataset, FeatureSchema, Instance};
use crate::game::{Game, GameError, PayoffVector};
use crate::model::{LinearModel, Predictor};
use crate::vocabulary::{IndexSet, NamedSet};

/// Largest game solved exactly.
pub const MAX_EXACT_PLAYERS: usize = 12;

#[derive(Debug, Error)]
pub enum ShapleyError {
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("exact Shapley values support at most {max} players, got {n}")]
    Capacity { n: usize, max: usize },
    #[error("the background set is empty")]
    EmptyBackground,
    #[error("expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("at least one permutation is required")]
    ZeroPermutations,
    #[error("output {index} does not exist; the model has {n_outputs} outputs")]
    OutputOutOfRange { index: usize, n_outputs: usize },
    #[error("groups `{0}` and `{1}` share features")]
    Overlap(String, String),
}

/// Rows standing in for "feature unknown".
#[derive(Clone, Debug, PartialEq)]
pub struct BackgroundSet {
    rows: Vec<Vec<f64>>,
}

impl BackgroundSet {
    pub fn new(schema: &FeatureSchema, rows: Vec<Vec<f64>>) -> Result<Self, ShapleyError> {
        if rows.is_empty() {
            return Err(ShapleyError::EmptyBackground);
        }
        for r in &rows {
            schema.validate(r)?;
        }
        Ok(BackgroundSet { rows })
    }

    pub fn from_dataset(data: &Dataset) -> Result<Self, ShapleyError> {
        BackgroundSet::new(
            &data.schema,
            data.instances.iter().map(|i| i.values().to_vec()).collect(),
        )
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.rows[0].len()
    }

    /// Column means `E[X_i]`.
    pub fn means(&self) -> Vec<f64> {
        let n = self.rows.len() as f64;
        (0..self.n_features())
            .map(|i| self.rows.iter().map(|r| r[i]).sum::<f64>() / n)
            .collect()
    }
}

fn check_len(expected: usize, got: usize) -> Result<(), ShapleyError> {
    if expected != got {
        return Err(ShapleyError::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// `φ_i = w_i (x_i - E[X_i])`.
pub fn linear_shapley(weights: &[f64], x: &[f64], background: &BackgroundSet) -> Result<Vec<f64>, ShapleyError> {
    check_len(weights.len(), x.len())?;
    check_len(weights.len(), background.n_features())?;
    Ok(weights
        .iter()
        .zip(x)
        .zip(background.means())
        .map(|((w, xi), m)| w * xi - w * m)
        .collect())
}

/// `φ_i = w_i (u_i(x_i) - E[u_i(X_i)])` for a utility-weighted linear model.
pub fn linear_model_shapley(model: &LinearModel, x: &Instance, background: &BackgroundSet) -> Result<Vec<f64>, ShapleyError> {
    model.schema().validate(x.values())?;
    check_len(model.schema().len(), background.n_features())?;
    let n = background.len() as f64;
    Ok((0..model.weights().len())
        .map(|i| {
            let mean = background.rows().iter().map(|r| model.utility(i, r[i])).sum::<f64>() / n;
            model.weights()[i] * (model.utility(i, x.values()[i]) - mean)
        })
        .collect())
}

/// `|S|! (n-|S|-1)! / n!` for `|S| = 0..n`.
fn coalition_weights(n: usize) -> Vec<f64> {
    // w(s) = 1 / (n · C(n-1, s)), built iteratively to avoid factorials.
    let mut w = Vec::with_capacity(n);
    let mut binom = 1.0;
    for s in 0..n {
        w.push(1.0 / (n as f64 * binom));
        binom = binom * (n - 1 - s) as f64 / (s + 1) as f64;
    }
    w
}

/// Exact Shapley value of every player.
pub fn exact_shapley_game(g: &Game) -> Result<PayoffVector, ShapleyError> {
    let n = g.n_players();
    if n > MAX_EXACT_PLAYERS {
        return Err(ShapleyError::Capacity {
            n,
            max: MAX_EXACT_PLAYERS,
        });
    }
    let weights = coalition_weights(n);
    let mut phi = vec![0.0; n];
    for s in all_coalitions(n) {
        let ws = g.worth(s);
        let w = weights.get(s.len()).copied().unwrap_or(0.0);
        for (i, p) in phi.iter_mut().enumerate() {
            if !s.contains(i) {
                *p += w * (g.worth(s.with(i)) - ws);
            }
        }
    }
    Ok(PayoffVector(phi))
}

/// `g(z') = φ0 + Σ φ_i z'_i` over binary presence indicators `z'`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AfaExplanation {
    pub baseline: f64,
    pub attributions: Vec<f64>,
}

impl AfaExplanation {
    pub fn evaluate(&self, present: &[bool]) -> f64 {
        self.baseline
            + self
                .attributions
                .iter()
                .zip(present)
                .filter(|(_, &z)| z)
                .map(|(p, _)| p)
                .sum::<f64>()
    }
}

fn check_output<P: Predictor + ?Sized>(model: &P, j: usize) -> Result<(), ShapleyError> {
    let n_outputs = model.n_outputs();
    if j >= n_outputs {
        return Err(ShapleyError::OutputOutOfRange { index: j, n_outputs });
    }
    Ok(())
}

/// The game `v(S) = mean_b f(x_S, b_{N∖S})[j] - mean_b f(b)[j]` over
/// background rows `b`, returned with the subtracted offset.
pub fn replacement_game<P: Predictor + ?Sized>(
    model: &P,
    x: &Instance,
    background: &BackgroundSet,
    j: usize,
) -> Result<(f64, Game), ShapleyError> {
    model.schema().validate(x.values())?;
    check_output(model, j)?;
    let n = x.len();
    check_len(n, background.n_features())?;
    if n > MAX_EXACT_PLAYERS {
        return Err(ShapleyError::Capacity {
            n,
            max: MAX_EXACT_PLAYERS,
        });
    }
    let worths: Vec<f64> = all_coalitions(n)
        .collect::<Vec<Coalition>>()
        .par_iter()
        .map(|s| {
            let total: f64 = background
                .rows()
                .iter()
                .map(|b| {
                    let z: Vec<f64> = (0..n).map(|i| if s.contains(i) { x.values()[i] } else { b[i] }).collect();
                    model.predict_values(&z)[j]
                })
                .sum();
            total / background.len() as f64
        })
        .collect();
    let offset = worths[0];
    let centred = worths.into_iter().map(|w| w - offset).collect();
    Ok((offset, Game::new(n, centred)?))
}

/// Exact Shapley attributions of output `j` under background replacement.
pub fn exact_model_shapley<P: Predictor + ?Sized>(
    model: &P,
    x: &Instance,
    background: &BackgroundSet,
    j: usize,
) -> Result<AfaExplanation, ShapleyError> {
    let (baseline, g) = replacement_game(model, x, background, j)?;
    Ok(AfaExplanation {
        baseline,
        attributions: exact_shapley_game(&g)?.0,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloShapley {
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n_permutations: usize,
}

/// Permutation-sampling estimate of the Shapley values of output `j`.
///
/// Each permutation starts from one background row and switches features to
/// their values in `x` in permutation order; the output change at each switch
/// is that feature's marginal contribution. Permutation `p` draws its order
/// and row from a generator seeded with `seed` on stream `p`, so the result
/// is reproducible and independent of thread scheduling.
pub fn monte_carlo_shapley<P: Predictor + ?Sized>(
    model: &P,
    x: &Instance,
    background: &BackgroundSet,
    n_permutations: usize,
    seed: u64,
    j: usize,
) -> Result<MonteCarloShapley, ShapleyError> {
    if n_permutations == 0 {
        return Err(ShapleyError::ZeroPermutations);
    }
    if background.is_empty() {
        return Err(ShapleyError::EmptyBackground);
    }
    model.schema().validate(x.values())?;
    check_output(model, j)?;
    let n = x.len();
    check_len(n, background.n_features())?;
    let samples: Vec<Vec<f64>> = (0..n_permutations as u64)
        .into_par_iter()
        .map(|p| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(p);
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            let row = rng.random_range(0..background.len());
            let mut z = background.rows()[row].clone();
            let mut prev = model.predict_values(&z)[j];
            let mut contribution = vec![0.0; n];
            for &k in &order {
                z[k] = x.values()[k];
                let cur = model.predict_values(&z)[j];
                contribution[k] = cur - prev;
                prev = cur;
            }
            contribution
        })
        .collect();
    let m = n_permutations as f64;
    let mut values = vec![0.0; n];
    for s in &samples {
        for (v, c) in values.iter_mut().zip(s) {
            *v += c;
        }
    }
    values.iter_mut().for_each(|v| *v /= m);
    let stderr = (0..n)
        .map(|i| {
            if n_permutations < 2 {
                return 0.0;
            }
            let ss: f64 = samples.iter().map(|s| (s[i] - values[i]).powi(2)).sum();
            (ss / (m - 1.0) / m).sqrt()
        })
        .collect();
    Ok(MonteCarloShapley {
        values,
        stderr,
        n_permutations,
    })
}

/// A named attribution, possibly covering several features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub name: String,
    pub features: IndexSet,
    pub value: f64,
    pub stderr: Option<f64>,
}

/// Sums per-feature attributions within each group. Features not covered by
/// any group are kept as their own entries, so the total is preserved. Groups
/// must be disjoint. Group standard errors assume independent estimates.
pub fn group_attribution(
    attributions: &[f64],
    stderr: Option<&[f64]>,
    groups: &[NamedSet],
    schema: &FeatureSchema,
) -> Result<Vec<Attribution>, ShapleyError> {
    check_len(schema.len(), attributions.len())?;
    for (k, a) in groups.iter().enumerate() {
        if let Some(&i) = a.features.indices().last() {
            if i >= schema.len() {
                return Err(ShapleyError::DimensionMismatch {
                    expected: schema.len(),
                    got: i + 1,
                });
            }
        }
        if let Some(b) = groups[k + 1..].iter().find(|b| !a.features.is_disjoint(&b.features)) {
            return Err(ShapleyError::Overlap(a.name.clone(), b.name.clone()));
        }
    }
    let mut groups = groups.to_vec();
    for i in 0..schema.len() {
        if groups.iter().all(|g| !g.features.contains(i)) {
            groups.push(NamedSet {
                name: schema.feature(i).name.clone(),
                features: IndexSet::singleton(i),
            });
        }
    }
    Ok(groups
        .into_iter()
        .map(|g| {
            let value = g.features.indices().iter().map(|&i| attributions[i]).sum();
            let stderr = stderr.map(|se| g.features.indices().iter().map(|&i| se[i] * se[i]).sum::<f64>().sqrt());
            Attribution {
                name: g.name,
                features: g.features,
                value,
                stderr,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Feature;
    use crate::game::unanimity_game;

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-9)
    }

    #[test]
    fn weights_sum_over_coalition_sizes() {
        for n in 1..10 {
            let w = coalition_weights(n);
            // Each size s has C(n-1, s) coalitions without a given player.
            let mut binom = 1.0;
            let mut total = 0.0;
            for (s, ws) in w.iter().enumerate() {
                total += ws * binom;
                binom = binom * (n - 1 - s) as f64 / (s + 1) as f64;
            }
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn game_examples() {
        let u = unanimity_game(Coalition::grand(3), 3).unwrap();
        assert!(close(exact_shapley_game(&u).unwrap().as_slice(), &[1.0 / 3.0; 3]));

        let c = [0.5, -1.0, 2.0, 4.0];
        let additive = Game::from_fn(4, |s| s.members().map(|i| c[i]).sum()).unwrap();
        assert!(close(exact_shapley_game(&additive).unwrap().as_slice(), &c));

        let pairs = Game::from_fn(3, |s| if s.len() >= 2 { 1.0 } else { 0.0 }).unwrap();
        assert!(close(exact_shapley_game(&pairs).unwrap().as_slice(), &[1.0 / 3.0; 3]));

        let big = Game::from_fn(13, |_| 0.0).unwrap();
        assert!(matches!(exact_shapley_game(&big), Err(ShapleyError::Capacity { n: 13, .. })));
    }

    fn unit_background(rows: Vec<Vec<f64>>) -> BackgroundSet {
        let schema = FeatureSchema::new(
            (0..rows[0].len())
                .map(|i| Feature::numeric(format!("x{}", i + 1), -10.0, 10.0))
                .collect(),
        )
        .unwrap();
        BackgroundSet::new(&schema, rows).unwrap()
    }

    #[test]
    fn linear_examples() {
        let bg = unit_background(vec![vec![0.0, 0.0], vec![1.0, 1.0]]);
        assert_eq!(linear_shapley(&[2.0, 3.0], &[1.0, 1.0], &bg).unwrap(), vec![1.0, 1.5]);
        assert_eq!(linear_shapley(&[2.0, 3.0], &[0.5, 0.5], &bg).unwrap(), vec![0.0, 0.0]);
        assert_eq!(linear_shapley(&[1.0, 0.0], &[0.7, 0.2], &bg).unwrap()[1], 0.0);
        assert!(linear_shapley(&[1.0], &[0.7, 0.2], &bg).is_err());
    }

    #[test]
    fn exact_model_values_are_locally_accurate() {
        let m = LinearModel::unit(vec![0.2, 0.5, 0.3]).unwrap();
        let bg = BackgroundSet::new(m.schema(), vec![vec![0.0, 0.5, 1.0], vec![0.4, 0.1, 0.2]]).unwrap();
        let x = Instance::new(m.schema(), vec![0.9, 0.3, 0.6]).unwrap();
        let afa = exact_model_shapley(&m, &x, &bg, 0).unwrap();
        assert!((afa.evaluate(&[true; 3]) - m.predict_values(x.values())[0]).abs() < 1e-12);
        let closed = linear_shapley(m.weights(), x.values(), &bg).unwrap();
        assert!(close(&afa.attributions, &closed));
        assert!(close(&linear_model_shapley(&m, &x, &bg).unwrap(), &closed));
    }

    #[test]
    fn monte_carlo_is_reproducible_and_efficient_per_permutation() {
        let m = LinearModel::unit(vec![0.2, 0.5, 0.3]).unwrap();
        let bg = BackgroundSet::new(m.schema(), vec![vec![0.0, 0.5, 1.0], vec![0.4, 0.1, 0.2]]).unwrap();
        let x = Instance::new(m.schema(), vec![0.9, 0.3, 0.6]).unwrap();
        let a = monte_carlo_shapley(&m, &x, &bg, 300, 7, 0).unwrap();
        let b = monte_carlo_shapley(&m, &x, &bg, 300, 7, 0).unwrap();
        assert_eq!(a, b);
        let closed = linear_shapley(m.weights(), x.values(), &bg).unwrap();
        for ((v, se), c) in a.values.iter().zip(&a.stderr).zip(&closed) {
            assert!((v - c).abs() <= 3.0 * se + 1e-12);
        }
        assert!(matches!(
            monte_carlo_shapley(&m, &x, &bg, 0, 7, 0),
            Err(ShapleyError::ZeroPermutations)
        ));
    }

    #[test]
    fn grouping() {
        let schema = FeatureSchema::new(
            ["a", "b", "c", "d"].iter().map(|n| Feature::numeric(*n, 0.0, 1.0)).collect(),
        )
        .unwrap();
        let phi = [0.1, -0.3, 0.25, 0.05];
        let g = |name: &str, f: &[usize]| NamedSet {
            name: name.into(),
            features: IndexSet::new(f.iter().copied()).unwrap(),
        };
        let out = group_attribution(&phi, None, &[g("AB", &[0, 1])], &schema).unwrap();
        assert_eq!(out.iter().map(|a| a.name.as_str()).collect::<Vec<_>>(), ["AB", "c", "d"]);
        assert!((out[0].value + 0.2).abs() < 1e-12);
        let total: f64 = out.iter().map(|a| a.value).sum();
        assert!((total - phi.iter().sum::<f64>()).abs() < 1e-12);
        let singles: Vec<f64> = group_attribution(&phi, None, &[], &schema).unwrap().iter().map(|a| a.value).collect();
        assert_eq!(singles, phi);
        assert!(matches!(
            group_attribution(&phi, None, &[g("AB", &[0, 1]), g("BC", &[1, 2])], &schema),
            Err(ShapleyError::Overlap(..))
        ));
    }
}
