use serde::{Deserialize, Serialize};

use super::{ModelError, Predictor, Task};
use crate::data::{Feature, FeatureKind, FeatureSchema};

/// Maps a raw feature value onto `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UtilityTransform {
    /// The raw value itself; the feature range must lie inside `[0, 1]`.
    Identity,
    /// `(x - lo) / (hi - lo)`.
    Increasing { lo: f64, hi: f64 },
    /// `(hi - x) / (hi - lo)`.
    Decreasing { lo: f64, hi: f64 },
    /// One utility per categorical level.
    Levels { utilities: Vec<f64> },
}

impl UtilityTransform {
    pub fn apply(&self, x: f64) -> f64 {
        match self {
            UtilityTransform::Identity => x,
            UtilityTransform::Increasing { lo, hi } => (x - lo) / (hi - lo),
            UtilityTransform::Decreasing { lo, hi } => (hi - x) / (hi - lo),
            UtilityTransform::Levels { utilities } => utilities[x as usize],
        }
    }

    fn check(&self, feature: &Feature) -> Result<(), String> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        match (self, &feature.kind) {
            (UtilityTransform::Identity, FeatureKind::Numeric { lo, hi }) => {
                if unit(*lo) && unit(*hi) {
                    Ok(())
                } else {
                    Err(format!("identity utility needs a range inside [0, 1], `{}` spans [{lo}, {hi}]", feature.name))
                }
            }
            (
                UtilityTransform::Increasing { lo: a, hi: b } | UtilityTransform::Decreasing { lo: a, hi: b },
                FeatureKind::Numeric { lo, hi },
            ) => {
                if a < b && a <= lo && hi <= b {
                    Ok(())
                } else {
                    Err(format!("utility range [{a}, {b}] does not cover `{}`", feature.name))
                }
            }
            (UtilityTransform::Levels { utilities }, FeatureKind::Categorical { levels }) => {
                if utilities.len() == levels.len() && utilities.iter().all(|&u| unit(u)) {
                    Ok(())
                } else {
                    Err(format!("`{}` needs one utility in [0, 1] per level", feature.name))
                }
            }
            _ => Err(format!("utility transform does not match the kind of `{}`", feature.name)),
        }
    }
}

/// `y = w_0 + Σ w_i u_i(x_i)`: a weighted sum of per-feature utilities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    schema: FeatureSchema,
    intercept: f64,
    weights: Vec<f64>,
    utilities: Vec<UtilityTransform>,
    output: String,
}

impl LinearModel {
    pub fn new(
        schema: FeatureSchema,
        intercept: f64,
        weights: Vec<f64>,
        utilities: Vec<UtilityTransform>,
    ) -> Result<Self, ModelError> {
        if weights.len() != schema.len() || utilities.len() != schema.len() {
            return Err(ModelError::Invalid(format!(
                "{} features but {} weights and {} utility transforms",
                schema.len(),
                weights.len(),
                utilities.len()
            )));
        }
        if !intercept.is_finite() || weights.iter().any(|w| !w.is_finite()) {
            return Err(ModelError::Invalid("weights must be finite".into()));
        }
        for (u, f) in utilities.iter().zip(schema.features()) {
            u.check(f).map_err(ModelError::Invalid)?;
        }
        Ok(LinearModel {
            schema,
            intercept,
            weights,
            utilities,
            output: "y".into(),
        })
    }

    /// Features `x1..xN` on `[0, 1]` with identity utilities and no intercept.
    pub fn unit(weights: Vec<f64>) -> Result<Self, ModelError> {
        let schema = FeatureSchema::new(
            (1..=weights.len())
                .map(|i| Feature::numeric(format!("x{i}"), 0.0, 1.0))
                .collect(),
        )?;
        let utilities = vec![UtilityTransform::Identity; weights.len()];
        LinearModel::new(schema, 0.0, weights, utilities)
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn utilities(&self) -> &[UtilityTransform] {
        &self.utilities
    }

    /// `u_i(x_i)`.
    pub fn utility(&self, feature: usize, value: f64) -> f64 {
        self.utilities[feature].apply(value)
    }
}

impl Predictor for LinearModel {
    fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    fn output_names(&self) -> Vec<String> {
        vec![self.output.clone()]
    }

    fn task(&self) -> Task {
        Task::Utility
    }

    fn predict_values(&self, x: &[f64]) -> Vec<f64> {
        let y = self.intercept
            + self
                .weights
                .iter()
                .zip(&self.utilities)
                .zip(x)
                .map(|((w, u), &v)| w * u.apply(v))
                .sum::<f64>();
        vec![y]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Instance;
    use crate::model::predict;

    #[test]
    fn unit_model_examples() {
        let m = LinearModel::unit(vec![0.5, 0.5]).unwrap();
        let x = Instance::new(m.schema(), vec![1.0, 1.0]).unwrap();
        assert_eq!(predict(&m, &x).unwrap(), vec![1.0]);

        let m = LinearModel::unit(vec![0.3, 0.7]).unwrap();
        let x = Instance::new(m.schema(), vec![0.0, 1.0]).unwrap();
        assert_eq!(predict(&m, &x).unwrap(), vec![0.7]);
    }

    #[test]
    fn schema_mismatch_is_rejected() {
        let m = LinearModel::unit(vec![0.3, 0.7]).unwrap();
        let other = LinearModel::unit(vec![1.0]).unwrap();
        let x = Instance::new(other.schema(), vec![0.5]).unwrap();
        assert!(predict(&m, &x).is_err());
    }

    #[test]
    fn transforms() {
        let schema = FeatureSchema::new(vec![
            Feature::numeric("age", 0.0, 80.0),
            Feature::numeric("price", 10.0, 20.0),
            Feature::categorical("size", ["s", "m", "l"]),
        ])
        .unwrap();
        let m = LinearModel::new(
            schema,
            0.0,
            vec![0.2, 0.3, 0.5],
            vec![
                UtilityTransform::Increasing { lo: 0.0, hi: 80.0 },
                UtilityTransform::Decreasing { lo: 10.0, hi: 20.0 },
                UtilityTransform::Levels {
                    utilities: vec![0.0, 0.5, 1.0],
                },
            ],
        )
        .unwrap();
        let y = m.predict_values(&[40.0, 10.0, 2.0])[0];
        assert!((y - (0.2 * 0.5 + 0.3 * 1.0 + 0.5 * 1.0)).abs() < 1e-12);
    }

    #[test]
    fn invalid_transforms() {
        let schema = FeatureSchema::new(vec![Feature::numeric("a", 0.0, 2.0)]).unwrap();
        assert!(LinearModel::new(schema.clone(), 0.0, vec![1.0], vec![UtilityTransform::Identity]).is_err());
        assert!(LinearModel::new(
            schema.clone(),
            0.0,
            vec![1.0],
            vec![UtilityTransform::Increasing { lo: 0.0, hi: 1.0 }]
        )
        .is_err());
        assert!(LinearModel::new(schema, 0.0, vec![1.0, 2.0], vec![UtilityTransform::Identity]).is_err());
    }
}
